//! Inclusive multi-level set-associative LRU cache simulator.
//!
//! Used as a timing source with known capacities: replaying a chase through a
//! [`Hierarchy`] gives a latency curve whose steps sit exactly where the
//! configured levels overflow.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::probe::{self, ChaseBuffer, ChaseTimer, LatencyData, PatternKind, ProbeError, SweepConfig, ELEMENT_BYTES};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid hierarchy: {0}")]
    InvalidSpec(&'static str),
    #[error("buffer covers no addresses")]
    EmptyBuffer,
    #[error("need at least 2 traversals (one warm-up, one measured), got {0}")]
    TooFewTraversals(usize),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheLevelSpec {
    pub capacity: usize,
    pub line_bytes: usize,
    pub associativity: usize,
    /// Hit latency in ns.
    pub hit_latency: f64,
}

impl CacheLevelSpec {
    pub fn sets(&self) -> usize {
        self.capacity / (self.line_bytes * self.associativity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    /// Innermost level first.
    pub levels: Vec<CacheLevelSpec>,
    /// Cost of an access that misses every level, in ns.
    pub memory_latency: f64,
}

impl HierarchySpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.levels.is_empty() {
            return Err(SimError::InvalidSpec("at least one level is required"));
        }
        let line = self.levels[0].line_bytes;
        for l in &self.levels {
            if l.capacity == 0 || l.line_bytes == 0 || l.associativity == 0 {
                return Err(SimError::InvalidSpec(
                    "capacity, line size and associativity must be positive",
                ));
            }
            if !(l.hit_latency.is_finite() && l.hit_latency > 0.0) {
                return Err(SimError::InvalidSpec("hit latency must be positive and finite"));
            }
            if l.capacity % (l.line_bytes * l.associativity) != 0 {
                return Err(SimError::InvalidSpec(
                    "capacity must be a multiple of line_bytes * associativity",
                ));
            }
            if l.line_bytes != line {
                return Err(SimError::InvalidSpec("all levels must share one line size"));
            }
        }
        for w in self.levels.windows(2) {
            if w[1].capacity <= w[0].capacity {
                return Err(SimError::InvalidSpec("capacities must strictly increase"));
            }
            if w[1].hit_latency <= w[0].hit_latency {
                return Err(SimError::InvalidSpec("hit latencies must strictly increase"));
            }
        }
        let last = self.levels[self.levels.len() - 1];
        if !(self.memory_latency.is_finite() && self.memory_latency > last.hit_latency) {
            return Err(SimError::InvalidSpec(
                "memory latency must exceed the last level's hit latency",
            ));
        }
        Ok(())
    }
}

const INVALID: u64 = u64::MAX;

/// One set-associative level. Lines are stored by full line number so that
/// back-invalidation from outer levels is a plain lookup. Each set is kept in
/// recency order, most recent first; empty ways (`INVALID`) sit at the back.
#[derive(Debug, Clone)]
struct Level {
    sets: u64,
    /// `sets - 1` when `sets` is a power of two, else 0.
    mask: u64,
    ways: usize,
    lines: Vec<u64>,
}

impl Level {
    fn new(spec: &CacheLevelSpec) -> Self {
        let sets = spec.sets();
        Level {
            sets: sets as u64,
            mask: if sets.is_power_of_two() { sets as u64 - 1 } else { 0 },
            ways: spec.associativity,
            lines: alloc::vec![INVALID; sets * spec.associativity],
        }
    }

    fn set(&self, line: u64) -> core::ops::Range<usize> {
        let set = if self.mask != 0 {
            line & self.mask
        } else {
            line % self.sets
        };
        let b = set as usize * self.ways;
        b..b + self.ways
    }

    fn find(&self, line: u64) -> Option<usize> {
        position(&self.lines[self.set(line)], line)
    }

    /// Makes `line` the most recent of its set, filling it over the least
    /// recent way on a miss. Returns whether it hit and the line evicted by
    /// the fill, if any.
    fn touch(&mut self, line: u64) -> (bool, Option<u64>) {
        let range = self.set(line);
        let set = &mut self.lines[range];
        // Fixed widths let the common associativities unroll.
        match set.len() {
            8 => touch_set(<&mut [u64; 8]>::try_from(set).expect("8 ways"), line),
            16 => touch_set(<&mut [u64; 16]>::try_from(set).expect("16 ways"), line),
            _ => touch_set(set, line),
        }
    }

    fn invalidate(&mut self, line: u64) {
        let range = self.set(line);
        let set = &mut self.lines[range];
        match set.len() {
            8 => remove_from_set(<&mut [u64; 8]>::try_from(set).expect("8 ways"), line),
            16 => remove_from_set(<&mut [u64; 16]>::try_from(set).expect("16 ways"), line),
            _ => remove_from_set(set, line),
        }
    }

    fn clear(&mut self) {
        self.lines.fill(INVALID);
    }
}

/// Moves `line` to the front of `set`, shifting the ways before it back by
/// one. On a miss the last way is the one shifted out.
#[inline(always)]
fn touch_set(set: &mut [u64], line: u64) -> (bool, Option<u64>) {
    let last = set.len() - 1;
    let p = position(set, line).unwrap_or(last);
    let hit = set[p] == line;
    let out = set[p];
    let mut i = p;
    while i > 0 {
        set[i] = set[i - 1];
        i -= 1;
    }
    set[0] = line;
    (hit, (!hit && out != INVALID).then_some(out))
}

/// Drops `line` from `set`, closing the gap; the last way becomes empty.
#[inline(always)]
fn remove_from_set(set: &mut [u64], line: u64) {
    if let Some(p) = position(set, line) {
        for i in p..set.len() - 1 {
            set[i] = set[i + 1];
        }
        let last = set.len() - 1;
        set[last] = INVALID;
    }
}

/// Index of `line` in `set`. Scans every way without branching; a line
/// appears at most once per set.
#[inline(always)]
fn position(set: &[u64], line: u64) -> Option<usize> {
    let mut found = usize::MAX;
    for (i, &l) in set.iter().enumerate() {
        if l == line {
            found = i;
        }
    }
    (found != usize::MAX).then_some(found)
}

/// Mutable simulation state for one [`HierarchySpec`].
#[derive(Debug, Clone)]
pub struct Hierarchy {
    spec: HierarchySpec,
    levels: Vec<Level>,
    line_bytes: u64,
    /// `log2(line_bytes)` when it is a power of two.
    line_shift: Option<u32>,
    /// Line of the previous access; it is the most recent way of its set at
    /// every level, so repeating it changes nothing.
    last_line: u64,
}

impl Hierarchy {
    pub fn new(spec: HierarchySpec) -> Result<Self, SimError> {
        spec.validate()?;
        let levels = spec.levels.iter().map(Level::new).collect();
        let line_bytes = spec.levels[0].line_bytes as u64;
        Ok(Hierarchy {
            spec,
            levels,
            line_bytes,
            line_shift: line_bytes.is_power_of_two().then(|| line_bytes.trailing_zeros()),
            last_line: INVALID,
        })
    }

    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    pub fn reset(&mut self) {
        self.levels.iter_mut().for_each(Level::clear);
        self.last_line = INVALID;
    }

    /// Index of the innermost level holding `addr`, or `None` on a full miss.
    pub fn hit_level(&self, addr: u64) -> Option<usize> {
        let line = addr / self.line_bytes;
        self.levels.iter().position(|l| l.find(line).is_some())
    }

    pub fn contains(&self, level: usize, addr: u64) -> bool {
        self.levels[level].find(addr / self.line_bytes).is_some()
    }

    /// Performs one access and returns its cost in ns.
    ///
    /// Every level is updated from the outside in: hits refresh the line's
    /// recency, misses fill the line. A line evicted from an outer level is
    /// removed from all inner levels so the hierarchy stays inclusive.
    pub fn access(&mut self, addr: u64) -> f64 {
        let line = match self.line_shift {
            Some(shift) => addr >> shift,
            None => addr / self.line_bytes,
        };
        if line == self.last_line {
            return self.spec.levels[0].hit_latency;
        }
        self.last_line = line;
        let mut hit = None;
        for i in (0..self.levels.len()).rev() {
            let (was_hit, evicted) = self.levels[i].touch(line);
            if was_hit {
                hit = Some(i);
            }
            if let Some(evicted) = evicted {
                for inner in &mut self.levels[..i] {
                    inner.invalidate(evicted);
                }
            }
        }
        match hit {
            Some(level) => self.spec.levels[level].hit_latency,
            None => self.spec.memory_latency,
        }
    }

    /// Replays `traversals` full traversals of the chase and returns the
    /// summed cost in ns.
    pub fn run_chase(&mut self, buffer: &ChaseBuffer, traversals: usize) -> f64 {
        let slots = buffer.slots();
        let mut total = 0.0;
        let mut at = 0usize;
        for _ in 0..traversals {
            for _ in 0..slots.len() {
                total += self.access((at * ELEMENT_BYTES) as u64);
                at = slots[at];
            }
        }
        total
    }
}

/// Mean cost per access over traversals 2..=`traversals` of a fresh
/// hierarchy; the first traversal only warms the caches.
pub fn simulate_chase(spec: &HierarchySpec, buffer: &ChaseBuffer, traversals: usize) -> Result<f64, SimError> {
    if buffer.is_empty() {
        return Err(SimError::EmptyBuffer);
    }
    if traversals < 2 {
        return Err(SimError::TooFewTraversals(traversals));
    }
    let mut h = Hierarchy::new(spec.clone())?;
    h.run_chase(buffer, 1);
    let measured = traversals - 1;
    let total = h.run_chase(buffer, measured);
    Ok(total / (measured as f64 * buffer.len() as f64))
}

/// [`ChaseTimer`] backed by the simulator. Each measurement starts from
/// empty caches; reported "time" is the summed access cost.
#[derive(Debug, Clone)]
pub struct SimTimer {
    hierarchy: Hierarchy,
}

impl SimTimer {
    pub fn new(spec: HierarchySpec) -> Result<Self, SimError> {
        Ok(SimTimer {
            hierarchy: Hierarchy::new(spec)?,
        })
    }
}

impl ChaseTimer for SimTimer {
    fn resolution_ns(&self) -> f64 {
        0.0
    }

    fn prepare(&mut self, _buffer: &ChaseBuffer) {
        self.hierarchy.reset();
    }

    fn run(&mut self, buffer: &ChaseBuffer, traversals: usize) -> f64 {
        self.hierarchy.run_chase(buffer, traversals)
    }
}

/// Same ladder and averaging as [`probe::sweep`], timed by the simulator.
pub fn synthetic_sweep(
    spec: &HierarchySpec,
    config: &SweepConfig,
    pattern: PatternKind,
) -> Result<Vec<LatencyData>, SimError> {
    let mut timer = SimTimer::new(spec.clone())?;
    Ok(probe::sweep(&mut timer, config, pattern)?)
}
