//! Pointer-chase buffers and latency sweeps.
//!
//! A [`ChaseBuffer`] stores a single-cycle permutation: slot `i` holds the
//! index of the element visited after `i`. Walking it (`next = slots[next]`)
//! turns every access into a data-dependent load, so the time per step is the
//! load-to-use latency of whatever level of the hierarchy holds the element.
//!
//! Timing is abstracted behind [`ChaseTimer`] so the same measurement and sweep
//! logic runs against the wall clock (in the `latile` crate) or against the
//! cache simulator in [`crate::simcache`].

use alloc::vec::Vec;
use core::fmt;
use core::hint::black_box;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Bytes per chase element (one machine word).
pub const ELEMENT_BYTES: usize = core::mem::size_of::<usize>();

/// Assumed cache line size, used only to validate sweep bounds.
pub const CACHE_LINE_BYTES: usize = 64;

/// Default chase stride in elements. Prime, so it is co-prime with most lengths.
pub const DEFAULT_STRIDE_ELEMS: usize = 7;

/// Sweeps are abandoned when more than this fraction of points fail.
const MAX_FAILED_FRACTION: f64 = 0.25;

/// How many times a point is retried with 10x the repetitions when the
/// timed window is too short for the timer.
const RESOLUTION_RETRIES: usize = 3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("chase buffer needs at least 2 elements, got {0}")]
    TooShort(usize),
    #[error("stride must be at least 1 element")]
    ZeroStride,
    #[error("no stride co-prime with length {len} found at or above {start}")]
    NoUsableStride { start: usize, len: usize },
    #[error("repetitions must be at least 1")]
    ZeroRepetitions,
    #[error("timer resolution {resolution_ns} ns exceeds 1% of the timed window ({elapsed_ns} ns); raise repetitions")]
    TimerResolution { resolution_ns: f64, elapsed_ns: f64 },
    #[error("timer reported an unusable duration: {0} ns")]
    BadDuration(f64),
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("sweep aborted: {failed} of {total} points could not be measured")]
    SweepAborted { failed: usize, total: usize },
}

/// Order in which the chase visits the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    /// Repeated forward strided passes: A B C A B C.
    Cyclic,
    /// A forward strided pass followed by the mirrored backward pass: A B C C B A.
    Sawtooth,
}

impl PatternKind {
    pub const ALL: [PatternKind; 2] = [PatternKind::Cyclic, PatternKind::Sawtooth];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Cyclic => "cyclic",
            PatternKind::Sawtooth => "sawtooth",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cyclic" => Ok(PatternKind::Cyclic),
            "sawtooth" => Ok(PatternKind::Sawtooth),
            _ => Err("expected `cyclic` or `sawtooth`"),
        }
    }
}

/// A pointer-chase permutation forming one cycle through every element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaseBuffer {
    slots: Vec<usize>,
    pattern: PatternKind,
    stride_elems: usize,
}

impl ChaseBuffer {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn pattern(&self) -> PatternKind {
        self.pattern
    }

    /// Stride actually used, after adjustment for co-primality.
    pub fn stride_elems(&self) -> usize {
        self.stride_elems
    }

    /// Working-set size in bytes.
    pub fn bytes(&self) -> usize {
        self.slots.len() * ELEMENT_BYTES
    }

    /// Element indices in chase order starting from 0, one full cycle.
    pub fn visit_order(&self) -> impl Iterator<Item = usize> + '_ {
        let mut at = 0usize;
        (0..self.slots.len()).map(move |_| {
            let here = at;
            at = self.slots[at];
            here
        })
    }
}

/// Walks `steps` links starting at `start` and returns where the walk ended.
///
/// Each load depends on the previous one and the result passes through
/// `black_box`, so the loop cannot be shortened or removed.
#[inline(never)]
pub fn chase(slots: &[usize], start: usize, steps: usize) -> usize {
    let mut at = start;
    for _ in 0..steps {
        at = slots[at];
    }
    black_box(at)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Smallest stride `>= requested` that is co-prime with `len` and not a
/// power of two. A requested stride of 1 is kept as is (plain sequential walk).
pub fn adjust_stride(len: usize, requested: usize) -> Result<usize, ProbeError> {
    if requested == 0 {
        return Err(ProbeError::ZeroStride);
    }
    if requested == 1 {
        return Ok(1);
    }
    let limit = requested.saturating_add(len.saturating_mul(2)).saturating_add(64);
    let mut s = requested;
    while s <= limit {
        if !s.is_power_of_two() && gcd(s, len) == 1 {
            return Ok(s);
        }
        s = match s.checked_add(1) {
            Some(next) => next,
            None => break,
        };
    }
    Err(ProbeError::NoUsableStride { start: requested, len })
}

/// The stride [`adjust_stride`] settles on when `len` puts no constraint on it.
fn natural_stride(requested: usize) -> usize {
    let mut s = requested.max(1);
    while s > 1 && s.is_power_of_two() {
        s += 1;
    }
    s
}

/// Builds a chase buffer of `len_elems` elements.
///
/// The base visit order is `k * stride mod len`. Cyclic walks it front to back;
/// Sawtooth walks the first half forward and then the second half backward.
/// Either way the order is linked into a single cycle.
pub fn generate_chase(len_elems: usize, pattern: PatternKind, stride_elems: usize) -> Result<ChaseBuffer, ProbeError> {
    if len_elems < 2 {
        return Err(ProbeError::TooShort(len_elems));
    }
    let stride = adjust_stride(len_elems, stride_elems)?;
    let step = stride % len_elems;

    let mut order = Vec::with_capacity(len_elems);
    let mut pos = 0usize;
    for _ in 0..len_elems {
        order.push(pos);
        pos += step;
        if pos >= len_elems {
            pos -= len_elems;
        }
    }
    if pattern == PatternKind::Sawtooth {
        let half = len_elems.div_ceil(2);
        order[half..].reverse();
    }

    let mut slots = alloc::vec![0usize; len_elems];
    for w in order.windows(2) {
        slots[w[0]] = w[1];
    }
    slots[order[len_elems - 1]] = order[0];

    Ok(ChaseBuffer {
        slots,
        pattern,
        stride_elems: stride,
    })
}

/// Source of chase timings: the wall clock, or a simulated hierarchy.
pub trait ChaseTimer {
    /// Smallest duration the timer can distinguish, in ns.
    fn resolution_ns(&self) -> f64;

    /// Called once before each measurement of `buffer`.
    fn prepare(&mut self, _buffer: &ChaseBuffer) {}

    /// Runs `traversals` complete traversals (each `buffer.len()` steps,
    /// starting from element 0) and returns the elapsed time in ns.
    fn run(&mut self, buffer: &ChaseBuffer, traversals: usize) -> f64;
}

/// Average ns per access over `repetitions` timed traversals, after
/// `warmup_runs` untimed ones.
///
/// All timed traversals share one timing window; if the timer's resolution is
/// more than 1% of that window the measurement is rejected.
pub fn measure_latency<T: ChaseTimer + ?Sized>(
    timer: &mut T,
    buffer: &ChaseBuffer,
    repetitions: usize,
    warmup_runs: usize,
) -> Result<f64, ProbeError> {
    if repetitions == 0 {
        return Err(ProbeError::ZeroRepetitions);
    }
    if buffer.len() < 2 {
        return Err(ProbeError::TooShort(buffer.len()));
    }
    timer.prepare(buffer);
    if warmup_runs > 0 {
        timer.run(buffer, warmup_runs);
    }
    let elapsed = timer.run(buffer, repetitions);
    if !elapsed.is_finite() || elapsed <= 0.0 {
        return Err(ProbeError::BadDuration(elapsed));
    }
    let resolution = timer.resolution_ns();
    if resolution > 0.01 * elapsed {
        return Err(ProbeError::TimerResolution {
            resolution_ns: resolution,
            elapsed_ns: elapsed,
        });
    }
    let accesses = (repetitions as f64) * (buffer.len() as f64);
    Ok(elapsed / accesses)
}

/// One point of the latency curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyData {
    /// Working-set size in bytes.
    pub size: usize,
    /// Average latency per access in ns.
    pub avg_time: f64,
}

impl LatencyData {
    pub fn new(size: usize, avg_time: f64) -> Self {
        LatencyData { size, avg_time }
    }

    pub fn is_valid(&self) -> bool {
        self.size > 0 && self.avg_time.is_finite() && self.avg_time > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub min_bytes: usize,
    pub max_bytes: usize,
    pub points_per_octave: usize,
    pub repetitions: usize,
    pub warmup_runs: usize,
    #[serde(default = "default_element_bytes")]
    pub element_bytes: usize,
    #[serde(default = "default_stride")]
    pub stride_elems: usize,
}

fn default_element_bytes() -> usize {
    ELEMENT_BYTES
}

fn default_stride() -> usize {
    DEFAULT_STRIDE_ELEMS
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            min_bytes: 1 << 10,
            max_bytes: 128 << 20,
            points_per_octave: 4,
            repetitions: 5,
            warmup_runs: 1,
            element_bytes: ELEMENT_BYTES,
            stride_elems: DEFAULT_STRIDE_ELEMS,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.element_bytes != ELEMENT_BYTES {
            return Err(ProbeError::InvalidConfig(
                "element_bytes must equal the machine word size",
            ));
        }
        if self.min_bytes < CACHE_LINE_BYTES {
            return Err(ProbeError::InvalidConfig("min_bytes must be at least one cache line"));
        }
        // min == max is accepted and yields a single point; analysis rejects it later.
        if self.max_bytes < self.min_bytes {
            return Err(ProbeError::InvalidConfig("max_bytes must not be below min_bytes"));
        }
        if self.points_per_octave == 0 {
            return Err(ProbeError::InvalidConfig("points_per_octave must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(ProbeError::InvalidConfig("repetitions must be at least 1"));
        }
        if self.stride_elems == 0 {
            return Err(ProbeError::InvalidConfig("stride_elems must be at least 1"));
        }
        Ok(())
    }

    /// Geometric size ladder: `min * 2^(k / points_per_octave)` for every `k`
    /// that stays within `max`, each rounded to the nearest element multiple.
    /// The element count is then moved to the nearest count the configured
    /// stride is co-prime with, so every point is chased with the same stride.
    /// Duplicates produced by rounding are dropped so the ladder is strictly
    /// increasing.
    pub fn ladder(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = Vec::new();
        if self.points_per_octave == 0 || self.max_bytes < self.min_bytes {
            return sizes;
        }
        let elem = self.element_bytes.max(1) as f64;
        let min = self.min_bytes as f64;
        let max = self.max_bytes as f64;
        let ppo = self.points_per_octave as f64;
        let mut k = 0u32;
        loop {
            let raw = min * libm::exp2(k as f64 / ppo);
            if raw > max * (1.0 + 1e-12) {
                break;
            }
            let elems = self.snap_to_stride(libm::round(raw / elem) as usize);
            let rounded = elems * self.element_bytes;
            let rounded = rounded.clamp(self.element_bytes * 2, self.max_bytes.max(self.element_bytes * 2));
            if sizes.last().is_none_or(|&last| rounded > last) {
                sizes.push(rounded);
            }
            k += 1;
        }
        sizes
    }

    /// Nearest element count (smaller first on ties, within 64 elements)
    /// whose chase keeps the stride `stride_elems` would naturally get.
    fn snap_to_stride(&self, elems: usize) -> usize {
        let natural = natural_stride(self.stride_elems);
        let keeps = |n: usize| n >= 2 && adjust_stride(n, self.stride_elems) == Ok(natural);
        let max_elems = self.max_bytes / self.element_bytes.max(1);
        for d in 0..=64usize {
            if d <= elems && keeps(elems - d) {
                return elems - d;
            }
            if elems + d <= max_elems && keeps(elems + d) {
                return elems + d;
            }
        }
        elems
    }

    /// Ratio between adjacent ladder sizes.
    pub fn step_ratio(&self) -> f64 {
        libm::exp2(1.0 / self.points_per_octave.max(1) as f64)
    }
}

/// Measures every ladder size with the given pattern.
///
/// A point whose timed window is too short for the timer is retried with ten
/// times the repetitions (up to three times). Points that still fail are left
/// out; the sweep fails only when more than a quarter of them do.
pub fn sweep<T: ChaseTimer + ?Sized>(
    timer: &mut T,
    config: &SweepConfig,
    pattern: PatternKind,
) -> Result<Vec<LatencyData>, ProbeError> {
    config.validate()?;
    let sizes = config.ladder();
    let mut out = Vec::with_capacity(sizes.len());
    let mut failed = 0usize;
    for &size in &sizes {
        let buffer = generate_chase(size / config.element_bytes, pattern, config.stride_elems)?;
        let mut reps = config.repetitions;
        let mut attempt = 0;
        let measured = loop {
            match measure_latency(timer, &buffer, reps, config.warmup_runs) {
                Err(ProbeError::TimerResolution { .. }) if attempt < RESOLUTION_RETRIES => {
                    reps = reps.saturating_mul(10);
                    attempt += 1;
                }
                other => break other,
            }
        };
        match measured {
            Ok(avg_time) => out.push(LatencyData { size, avg_time }),
            Err(_) => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * sizes.len() as f64 {
        return Err(ProbeError::SweepAborted {
            failed,
            total: sizes.len(),
        });
    }
    Ok(out)
}
