//! Affine loop nests, tile footprints, tile-size planning and the
//! strip-mine-and-reorder rewrite.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::CacheProfile;

pub const DEFAULT_SAFETY_FACTOR: f64 = 0.5;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TileError {
    #[error("invalid loop nest: {0}")]
    InvalidNest(String),
    #[error("unknown loop `{0}`")]
    UnknownLoop(String),
    #[error("no tile size given for loop `{0}`")]
    MissingTileSize(String),
    #[error("tile size {size} for loop `{name}` is outside [1, {extent}]")]
    TileOutOfRange { name: String, size: i64, extent: i64 },
    #[error("safety factor {0} is outside (0, 1]")]
    InvalidSafety(f64),
    #[error("can tile for 1 to 3 cache levels, got {0}")]
    InvalidLevels(usize),
    #[error("cache profile is not ordered l1 < l2 < l3")]
    InvalidProfile,
    #[error("control loop name `{0}` collides with an existing loop")]
    NameCollision(String),
}

/// `sum(coeff * loop) + constant`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AffineExpr {
    #[serde(default)]
    pub coeffs: BTreeMap<String, i64>,
    #[serde(default)]
    pub constant: i64,
}

impl AffineExpr {
    pub fn var(name: &str) -> Self {
        Self::offset(name, 0)
    }

    pub fn offset(name: &str, constant: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.to_string(), 1);
        AffineExpr { coeffs, constant }
    }

    pub fn constant(constant: i64) -> Self {
        AffineExpr {
            coeffs: BTreeMap::new(),
            constant,
        }
    }

    fn nonzero(&self) -> impl Iterator<Item = (&String, i64)> {
        self.coeffs.iter().filter(|(_, &c)| c != 0).map(|(n, &c)| (n, c))
    }

    pub fn uses(&self, name: &str) -> bool {
        self.coeffs.get(name).is_some_and(|&c| c != 0)
    }

    /// Coefficients with zeros dropped; two accesses with equal structure
    /// differ only in their constants.
    fn structure(&self) -> Vec<(String, i64)> {
        self.nonzero().map(|(n, c)| (n.clone(), c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Read,
    Write,
    ReadWrite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayAccess {
    pub array: String,
    pub element_bytes: u64,
    pub indices: Vec<AffineExpr>,
    pub mode: AccessMode,
}

impl ArrayAccess {
    pub fn new(array: &str, indices: Vec<AffineExpr>, mode: AccessMode) -> Self {
        ArrayAccess {
            array: array.to_string(),
            element_bytes: 8,
            indices,
            mode,
        }
    }

    pub fn uses(&self, name: &str) -> bool {
        self.indices.iter().any(|e| e.uses(name))
    }
}

fn one() -> i64 {
    1
}

/// A loop over `[lower, upper)`.
///
/// A loop with `within` set is confined to one tile of the named control
/// loop: it runs over `[max(lower, c), min(upper, c + step_c, end_c))`, where
/// `c` is the control loop's current value, `step_c` its step and `end_c` its
/// own effective upper bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loop {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
    #[serde(default = "one")]
    pub step: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within: Option<String>,
}

impl Loop {
    pub fn new(name: &str, lower: i64, upper: i64) -> Self {
        Loop {
            name: name.to_string(),
            lower,
            upper,
            step: 1,
            within: None,
        }
    }

    pub fn extent(&self) -> i64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopNest {
    /// Outermost first.
    pub loops: Vec<Loop>,
    pub accesses: Vec<ArrayAccess>,
    #[serde(default)]
    pub body_flops: u64,
}

impl LoopNest {
    pub fn validate(&self) -> Result<(), TileError> {
        let mut seen = BTreeSet::new();
        for l in &self.loops {
            if l.lower >= l.upper {
                return Err(TileError::InvalidNest(format!("loop `{}` has an empty range", l.name)));
            }
            if l.step < 1 {
                return Err(TileError::InvalidNest(format!("loop `{}` has step {}", l.name, l.step)));
            }
            if let Some(parent) = &l.within {
                if !seen.contains(parent.as_str()) {
                    return Err(TileError::InvalidNest(format!(
                        "loop `{}` is confined to `{parent}`, which is not an enclosing loop",
                        l.name
                    )));
                }
            }
            if !seen.insert(l.name.as_str()) {
                return Err(TileError::InvalidNest(format!("duplicate loop name `{}`", l.name)));
            }
        }
        for a in &self.accesses {
            if a.element_bytes == 0 {
                return Err(TileError::InvalidNest(format!(
                    "array `{}` has zero-byte elements",
                    a.array
                )));
            }
            for e in &a.indices {
                if let Some((n, _)) = e.nonzero().find(|(n, _)| !seen.contains(n.as_str())) {
                    return Err(TileError::InvalidNest(format!(
                        "access to `{}` references undeclared loop `{n}`",
                        a.array
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn find_loop(&self, name: &str) -> Option<&Loop> {
        self.loops.iter().find(|l| l.name == name)
    }

    pub fn loop_names(&self) -> Vec<String> {
        self.loops.iter().map(|l| l.name.clone()).collect()
    }

    /// Tile sizes equal to each loop's full extent.
    pub fn full_extents(&self) -> BTreeMap<String, i64> {
        self.loops.iter().map(|l| (l.name.clone(), l.extent())).collect()
    }

    /// Calls `f` with the value of every loop, in loop order, for each
    /// executed iteration.
    pub fn for_each_iteration(&self, mut f: impl FnMut(&[i64])) -> Result<(), TileError> {
        self.validate()?;
        let parents: Vec<Option<usize>> = self
            .loops
            .iter()
            .map(|l| {
                l.within
                    .as_ref()
                    .and_then(|p| self.loops.iter().position(|o| &o.name == p))
            })
            .collect();
        let mut values = alloc::vec![0i64; self.loops.len()];
        let mut ends = alloc::vec![0i64; self.loops.len()];
        self.walk(0, &parents, &mut values, &mut ends, &mut f);
        Ok(())
    }

    /// `ends[d]` holds loop `d`'s effective upper bound while it runs.
    fn walk(
        &self,
        depth: usize,
        parents: &[Option<usize>],
        values: &mut [i64],
        ends: &mut [i64],
        f: &mut impl FnMut(&[i64]),
    ) {
        if depth == self.loops.len() {
            f(values);
            return;
        }
        let l = &self.loops[depth];
        let (start, end) = match parents[depth] {
            Some(p) => {
                let origin = values[p];
                let tile_end = (origin + self.loops[p].step).min(ends[p]);
                (l.lower.max(origin), l.upper.min(tile_end))
            }
            None => (l.lower, l.upper),
        };
        ends[depth] = end;
        let mut v = start;
        while v < end {
            values[depth] = v;
            self.walk(depth + 1, parents, values, ends, f);
            v += l.step;
        }
    }

    /// Executed iterations projected onto the named loops, in execution order.
    pub fn iteration_points(&self, names: &[String]) -> Result<Vec<Vec<i64>>, TileError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.loops
                    .iter()
                    .position(|l| &l.name == n)
                    .ok_or_else(|| TileError::UnknownLoop(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        self.for_each_iteration(|v| out.push(idx.iter().map(|&i| v[i]).collect()))?;
        Ok(out)
    }
}

/// How array spans are converted to bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FootprintModel {
    /// Distinct elements.
    #[default]
    Elements,
    /// Like `Elements`, but the innermost (contiguous) dimension is rounded up
    /// to whole cache lines.
    Lines { line_bytes: u64 },
}

/// Bytes touched by one tile of the nest with the given tile sizes.
///
/// Accesses to the same array with identical coefficients are merged into
/// one box widened by the spread of their constant offsets; differently
/// structured accesses and distinct arrays are summed.
pub fn footprint(nest: &LoopNest, tile_sizes: &BTreeMap<String, i64>) -> Result<u64, TileError> {
    footprint_with(nest, tile_sizes, FootprintModel::Elements)
}

pub fn footprint_with(
    nest: &LoopNest,
    tile_sizes: &BTreeMap<String, i64>,
    model: FootprintModel,
) -> Result<u64, TileError> {
    nest.validate()?;
    if let Some(name) = tile_sizes.keys().find(|n| nest.find_loop(n).is_none()) {
        return Err(TileError::UnknownLoop(name.clone()));
    }
    for l in &nest.loops {
        let t = *tile_sizes
            .get(&l.name)
            .ok_or_else(|| TileError::MissingTileSize(l.name.clone()))?;
        if t < 1 || t > l.extent() {
            return Err(TileError::TileOutOfRange {
                name: l.name.clone(),
                size: t,
                extent: l.extent(),
            });
        }
    }

    // (array, per-dimension structure) -> (element bytes, per-dimension constant range)
    type Key = (String, Vec<Vec<(String, i64)>>);
    type Group = (u64, Vec<(i64, i64)>);
    let mut groups: BTreeMap<Key, Group> = BTreeMap::new();
    for a in &nest.accesses {
        let key = (a.array.clone(), a.indices.iter().map(AffineExpr::structure).collect());
        let entry = groups.entry(key).or_insert_with(|| {
            (
                a.element_bytes,
                a.indices.iter().map(|e| (e.constant, e.constant)).collect(),
            )
        });
        entry.0 = entry.0.max(a.element_bytes);
        for (range, e) in entry.1.iter_mut().zip(&a.indices) {
            range.0 = range.0.min(e.constant);
            range.1 = range.1.max(e.constant);
        }
    }

    let mut total: u64 = 0;
    for ((_, structure), (elem, ranges)) in &groups {
        let mut elems: u64 = 1;
        let dims = structure.len();
        for (d, (terms, (lo, hi))) in structure.iter().zip(ranges).enumerate() {
            let base: i64 = match terms.as_slice() {
                [] => 1,
                [(name, _)] => tile_sizes[name],
                many => many.iter().map(|(n, c)| c.abs() * (tile_sizes[n] - 1)).sum::<i64>() + 1,
            };
            let mut count = (base + (hi - lo)) as u64;
            if let FootprintModel::Lines { line_bytes } = model {
                if d + 1 == dims {
                    let per_line = (line_bytes / elem).max(1);
                    count = count.div_ceil(per_line) * per_line;
                }
            }
            elems = elems.saturating_mul(count);
        }
        total = total.saturating_add(elems.saturating_mul(*elem));
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Number of cache levels to tile for, innermost first (1 to 3).
    pub levels: usize,
    /// Loops eligible for tiling; all loops when `None`.
    pub tileable: Option<Vec<String>>,
    /// Drop tileable loops that index every access (no reuse across them).
    pub exempt_no_reuse: bool,
    pub model: FootprintModel,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            levels: 1,
            tileable: None,
            exempt_no_reuse: false,
            model: FootprintModel::Elements,
        }
    }
}

/// Tile sizes chosen for one cache level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileLevel {
    /// 1 = L1, 2 = L2, 3 = L3.
    pub cache_level: u8,
    /// The uniform tile size the scan settled on.
    pub tile: i64,
    /// Per-loop tile sizes (the uniform size clamped to each loop's extent).
    pub tile_sizes: BTreeMap<String, i64>,
    pub footprint_bytes: u64,
    pub capacity_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    /// Innermost cache level first.
    pub levels: Vec<TileLevel>,
    pub safety_factor: f64,
    #[serde(default)]
    pub model: FootprintModel,
    #[serde(default)]
    pub exempt_loops: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl TilePlan {
    pub fn untiled(safety_factor: f64, diagnostic: impl Into<String>) -> Self {
        TilePlan {
            levels: Vec::new(),
            safety_factor,
            model: FootprintModel::Elements,
            exempt_loops: Vec::new(),
            diagnostic: Some(diagnostic.into()),
        }
    }

    pub fn is_tiled(&self) -> bool {
        !self.levels.is_empty()
    }

    /// Tiled loop names, in the order of the first level's map.
    pub fn tiled_loops(&self) -> Vec<String> {
        self.levels
            .first()
            .map(|l| l.tile_sizes.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Re-checks the capacity and nesting constraints against `nest`.
    pub fn verify(&self, nest: &LoopNest) -> Result<(), String> {
        for (i, level) in self.levels.iter().enumerate() {
            if let Some(name) = level.tile_sizes.keys().find(|n| nest.find_loop(n).is_none()) {
                return Err(format!("plan names unknown loop `{name}`"));
            }
            let sizes = tile_box(nest, &level.tile_sizes);
            let fp = footprint_with(nest, &sizes, self.model).map_err(|e| e.to_string())?;
            let budget = self.safety_factor * level.capacity_bytes as f64;
            if fp as f64 > budget {
                return Err(format!(
                    "level {} footprint {fp} exceeds budget {budget}",
                    level.cache_level
                ));
            }
            if i > 0 {
                for (name, &t) in &self.levels[i - 1].tile_sizes {
                    if level.tile_sizes.get(name).is_some_and(|&outer| outer < t) {
                        return Err(format!("outer tile for `{name}` is smaller than the inner one"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Replaces the tile size of `name` on every level.
    pub fn override_tile(&mut self, nest: &LoopNest, name: &str, size: i64) -> Result<(), TileError> {
        let l = nest
            .find_loop(name)
            .ok_or_else(|| TileError::UnknownLoop(name.to_string()))?;
        if size < 1 || size > l.extent() {
            return Err(TileError::TileOutOfRange {
                name: name.to_string(),
                size,
                extent: l.extent(),
            });
        }
        for level in &mut self.levels {
            level.tile_sizes.insert(name.to_string(), size);
        }
        Ok(())
    }
}

/// Picks, for each cache level, the largest uniform tile size whose footprint
/// stays within `safety_factor` of that level's capacity.
///
/// The scan is exhaustive over `1..=max extent` (starting at the inner level's
/// size for outer levels, so tiles nest). If even a tile of 1 does not fit
/// L1, the result is an untiled plan carrying a diagnostic.
pub fn plan_tiles(
    nest: &LoopNest,
    profile: &CacheProfile,
    safety_factor: f64,
    options: &PlanOptions,
) -> Result<TilePlan, TileError> {
    nest.validate()?;
    if !(safety_factor > 0.0 && safety_factor <= 1.0) {
        return Err(TileError::InvalidSafety(safety_factor));
    }
    if !(1..=3).contains(&options.levels) {
        return Err(TileError::InvalidLevels(options.levels));
    }
    if !profile.is_ordered() {
        return Err(TileError::InvalidProfile);
    }

    let mut tileable: Vec<String> = match &options.tileable {
        Some(names) => {
            for n in names {
                if nest.find_loop(n).is_none() {
                    return Err(TileError::UnknownLoop(n.clone()));
                }
            }
            nest.loops
                .iter()
                .filter(|l| names.contains(&l.name))
                .map(|l| l.name.clone())
                .collect()
        }
        None => nest.loop_names(),
    };
    let mut exempt = Vec::new();
    if options.exempt_no_reuse && !nest.accesses.is_empty() {
        tileable.retain(|n| {
            let everywhere = nest.accesses.iter().all(|a| a.uses(n));
            if everywhere {
                exempt.push(n.clone());
            }
            !everywhere
        });
    }
    let mut plan = TilePlan {
        levels: Vec::new(),
        safety_factor,
        model: options.model,
        exempt_loops: exempt,
        diagnostic: None,
    };
    if tileable.is_empty() {
        plan.diagnostic = Some("no tileable loops".to_string());
        return Ok(plan);
    }

    let max_extent = tileable
        .iter()
        .map(|n| nest.find_loop(n).map_or(1, Loop::extent))
        .max()
        .unwrap_or(1);
    let mut floor = 1i64;
    for cache_level in 1..=options.levels {
        let capacity = profile.level(cache_level).unwrap_or(0) as u64;
        let budget = safety_factor * capacity as f64;
        let mut best: Option<(i64, BTreeMap<String, i64>, u64)> = None;
        for t in floor..=max_extent {
            let sizes = uniform_sizes(nest, &tileable, t);
            let fp = footprint_with(nest, &sizes, options.model)?;
            if fp as f64 <= budget {
                best = Some((t, sizes, fp));
            }
        }
        let Some((tile, sizes, fp)) = best else {
            if cache_level == 1 {
                let mut untiled = TilePlan::untiled(
                    safety_factor,
                    format!("even a tile of 1 exceeds {safety_factor} x {capacity} bytes of L1; not tiling"),
                );
                untiled.exempt_loops = plan.exempt_loops;
                untiled.model = options.model;
                return Ok(untiled);
            }
            plan.diagnostic = Some(format!(
                "no tile fits level {cache_level}; stopped at level {}",
                cache_level - 1
            ));
            break;
        };
        plan.levels.push(TileLevel {
            cache_level: cache_level as u8,
            tile,
            tile_sizes: tileable.iter().map(|n| (n.clone(), sizes[n])).collect(),
            footprint_bytes: fp,
            capacity_bytes: capacity,
        });
        floor = tile;
    }
    Ok(plan)
}

fn uniform_sizes(nest: &LoopNest, tileable: &[String], t: i64) -> BTreeMap<String, i64> {
    let tiles = tileable.iter().map(|n| (n.clone(), t)).collect();
    tile_box(nest, &tiles)
}

/// Iteration box of one tile: tiled loops span their tile (clamped to the
/// extent), loops enclosing the first tiled loop are fixed at one iteration
/// (the control loops sit below them), and the remaining loops run in full.
pub fn tile_box(nest: &LoopNest, tiles: &BTreeMap<String, i64>) -> BTreeMap<String, i64> {
    let first = nest.loops.iter().position(|l| tiles.contains_key(&l.name));
    nest.loops
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let size = match tiles.get(&l.name) {
                Some(&t) => t.min(l.extent()),
                None if first.is_some_and(|f| i < f) => 1,
                None => l.extent(),
            };
            (l.name.clone(), size)
        })
        .collect()
}

/// Name of the control loop for `name` at cache level `level`.
pub fn control_name(name: &str, level: u8) -> String {
    format!("{name}_t{level}")
}

/// Inserts control loops for every tiled loop.
///
/// The control loops of all levels (outermost cache level first, loops in
/// original order within a level) are placed right above the first tiled
/// loop; loops enclosing it, such as a time loop, stay outside. Original loops
/// keep their names and are confined to the innermost control loop's tile, so
/// index expressions are unchanged and each original iteration runs once.
pub fn tile_nest(nest: &LoopNest, plan: &TilePlan) -> Result<LoopNest, TileError> {
    nest.validate()?;
    if !plan.is_tiled() {
        return Ok(nest.clone());
    }
    for level in &plan.levels {
        for (name, &t) in &level.tile_sizes {
            let l = nest
                .find_loop(name)
                .ok_or_else(|| TileError::UnknownLoop(name.clone()))?;
            if t < 1 {
                return Err(TileError::TileOutOfRange {
                    name: name.clone(),
                    size: t,
                    extent: l.extent(),
                });
            }
        }
    }
    let is_tiled = |name: &str| plan.levels.iter().any(|lv| lv.tile_sizes.contains_key(name));
    let Some(first) = nest.loops.iter().position(|l| is_tiled(&l.name)) else {
        return Ok(nest.clone());
    };

    let mut loops: Vec<Loop> = nest.loops[..first].to_vec();
    let mut innermost_control: BTreeMap<String, String> = BTreeMap::new();
    for level in plan.levels.iter().rev() {
        for l in nest.loops.iter().filter(|l| level.tile_sizes.contains_key(&l.name)) {
            let name = control_name(&l.name, level.cache_level);
            if nest.find_loop(&name).is_some() || loops.iter().any(|x| x.name == name) {
                return Err(TileError::NameCollision(name));
            }
            loops.push(Loop {
                name: name.clone(),
                lower: l.lower,
                upper: l.upper,
                step: level.tile_sizes[&l.name],
                within: innermost_control.get(&l.name).cloned(),
            });
            innermost_control.insert(l.name.clone(), name);
        }
    }
    for l in &nest.loops[first..] {
        let mut l = l.clone();
        if let Some(control) = innermost_control.get(&l.name) {
            l.within = Some(control.clone());
        }
        loops.push(l);
    }
    Ok(LoopNest {
        loops,
        accesses: nest.accesses.clone(),
        body_flops: nest.body_flops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::PatternKind;
    use std::vec;

    fn gemm(n: i64) -> LoopNest {
        let v = AffineExpr::var;
        LoopNest {
            loops: vec![Loop::new("i", 0, n), Loop::new("j", 0, n), Loop::new("k", 0, n)],
            accesses: vec![
                ArrayAccess::new("C", vec![v("i"), v("j")], AccessMode::ReadWrite),
                ArrayAccess::new("A", vec![v("i"), v("k")], AccessMode::Read),
                ArrayAccess::new("B", vec![v("k"), v("j")], AccessMode::Read),
            ],
            body_flops: 2,
        }
    }

    fn uniform(nest: &LoopNest, t: i64) -> BTreeMap<String, i64> {
        nest.loops.iter().map(|l| (l.name.clone(), t)).collect()
    }

    fn profile(l1: usize) -> CacheProfile {
        CacheProfile {
            l1_bytes: l1,
            l2_bytes: l1 * 8,
            l3_bytes: l1 * 256,
            confidences: [0.5, 0.3, 0.2],
            source_pattern: PatternKind::Cyclic,
            created_at: 0,
            host_label: String::new(),
        }
    }

    #[test]
    fn gemm_footprint_is_three_blocks() {
        let n = gemm(100);
        for t in [1, 2, 10, 26, 100] {
            assert_eq!(footprint(&n, &uniform(&n, t)).unwrap(), 24 * (t * t) as u64);
        }
    }

    #[test]
    fn footprint_rejects_bad_sizes() {
        let n = gemm(10);
        assert!(matches!(
            footprint(&n, &uniform(&n, 11)),
            Err(TileError::TileOutOfRange { .. })
        ));
        assert!(matches!(
            footprint(&n, &uniform(&n, 0)),
            Err(TileError::TileOutOfRange { .. })
        ));
        let mut partial = uniform(&n, 2);
        partial.remove("k");
        assert_eq!(footprint(&n, &partial), Err(TileError::MissingTileSize("k".into())));
    }

    #[test]
    fn line_mode_rounds_contiguous_dimension() {
        let n = gemm(100);
        let fp = footprint_with(&n, &uniform(&n, 3), FootprintModel::Lines { line_bytes: 64 }).unwrap();
        // Each 3x3 block becomes 3 rows of one 8-element line.
        assert_eq!(fp, 3 * 3 * 8 * 8);
    }

    #[test]
    fn plan_gemm_l1_32k() {
        let n = gemm(2000);
        let p = plan_tiles(&n, &profile(32 << 10), 0.5, &PlanOptions::default()).unwrap();
        assert_eq!(p.levels[0].tile, 26);
        assert_eq!(p.levels[0].footprint_bytes, 16224);
        let p = plan_tiles(&n, &profile(32 << 10), 1.0, &PlanOptions::default()).unwrap();
        assert_eq!(p.levels[0].tile, 36);
    }

    #[test]
    fn plan_degrades_to_untiled() {
        let n = gemm(100);
        let p = plan_tiles(&n, &profile(32 << 10), 1e-6, &PlanOptions::default()).unwrap();
        assert!(!p.is_tiled());
        assert!(p.diagnostic.is_some());
        assert_eq!(
            plan_tiles(&n, &profile(32 << 10), 0.0, &PlanOptions::default()),
            Err(TileError::InvalidSafety(0.0))
        );
    }

    #[test]
    fn multi_level_plans_nest() {
        let n = gemm(1000);
        let opts = PlanOptions {
            levels: 3,
            ..PlanOptions::default()
        };
        let p = plan_tiles(&n, &profile(32 << 10), 0.5, &opts).unwrap();
        assert_eq!(p.levels.len(), 3);
        assert!(p.levels.windows(2).all(|w| w[0].tile <= w[1].tile));
        p.verify(&n).unwrap();
    }

    #[test]
    fn exemption_skips_loops_used_everywhere() {
        let v = AffineExpr::var;
        let n = LoopNest {
            loops: vec![Loop::new("i", 0, 64), Loop::new("j", 0, 64)],
            accesses: vec![
                ArrayAccess::new("x", vec![v("i")], AccessMode::ReadWrite),
                ArrayAccess::new("A", vec![v("i"), v("j")], AccessMode::Read),
            ],
            body_flops: 2,
        };
        let opts = PlanOptions {
            exempt_no_reuse: true,
            ..PlanOptions::default()
        };
        let p = plan_tiles(&n, &profile(32 << 10), 0.5, &opts).unwrap();
        assert_eq!(p.exempt_loops, ["i"]);
        assert_eq!(p.tiled_loops(), ["j"]);
    }

    fn single(name: &str, upper: i64, t: i64) -> (LoopNest, TilePlan) {
        let nest = LoopNest {
            loops: vec![Loop::new(name, 0, upper)],
            accesses: vec![],
            body_flops: 0,
        };
        let plan = TilePlan {
            levels: vec![TileLevel {
                cache_level: 1,
                tile: t,
                tile_sizes: [(name.to_string(), t)].into_iter().collect(),
                footprint_bytes: 0,
                capacity_bytes: 0,
            }],
            safety_factor: 1.0,
            model: FootprintModel::Elements,
            exempt_loops: vec![],
            diagnostic: None,
        };
        (nest, plan)
    }

    #[test]
    fn strip_mine_exact_divisor() {
        let (nest, plan) = single("i", 4, 2);
        let tiled = tile_nest(&nest, &plan).unwrap();
        let pts = tiled.iteration_points(&["i_t1".into(), "i".into()]).unwrap();
        assert_eq!(pts, [[0, 0], [0, 1], [2, 2], [2, 3]]);
    }

    #[test]
    fn strip_mine_with_remainder() {
        let (nest, plan) = single("i", 5, 2);
        let tiled = tile_nest(&nest, &plan).unwrap();
        let pts = tiled.iteration_points(&["i_t1".into(), "i".into()]).unwrap();
        assert_eq!(pts, [[0, 0], [0, 1], [2, 2], [2, 3], [4, 4]]);
    }

    #[test]
    fn unknown_loop_in_plan_is_rejected() {
        let (nest, mut plan) = single("i", 5, 2);
        plan.levels[0].tile_sizes.insert("zz".into(), 2);
        assert_eq!(tile_nest(&nest, &plan), Err(TileError::UnknownLoop("zz".into())));
        assert!(plan.override_tile(&nest, "q", 2).is_err());
    }

    #[test]
    fn time_loop_stays_outside() {
        let v = AffineExpr::var;
        let nest = LoopNest {
            loops: vec![Loop::new("t", 0, 3), Loop::new("i", 1, 9), Loop::new("j", 1, 9)],
            accesses: vec![ArrayAccess::new("A", vec![v("i"), v("j")], AccessMode::ReadWrite)],
            body_flops: 1,
        };
        let opts = PlanOptions {
            tileable: Some(vec!["i".into(), "j".into()]),
            ..PlanOptions::default()
        };
        let p = plan_tiles(&nest, &profile(256), 0.5, &opts).unwrap();
        let tiled = tile_nest(&nest, &p).unwrap();
        let names: Vec<_> = tiled.loops.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["t", "i_t1", "j_t1", "i", "j"]);
    }
}
