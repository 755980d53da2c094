//! Latency-driven loop tiling.
//!
//! The crate is split along the pipeline:
//!
//! * [`probe`] builds prefetcher-hostile pointer-chase buffers and measures
//!   average access latency over a geometric ladder of working-set sizes.
//! * [`analysis`] differentiates the latency curve, ranks the three sharpest
//!   jumps and turns them into a defensive [`analysis::CacheProfile`].
//! * [`simcache`] is a deterministic set-associative LRU hierarchy used as a
//!   ground-truth timing source.
//! * [`tiler`] models affine loop nests, computes tile footprints, picks tile
//!   sizes against a profile and rewrites nests with control loops.
//! * [`kernels`] holds the benchmark kernels in untiled and tiled form.
//!
//! Everything here is `no_std` (with `alloc`). Wall-clock timing, files and the
//! command line live in the `latile` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod kernels;
pub mod probe;
pub mod simcache;
pub mod tiler;

pub use analysis::{
    build_profile, confidence_scores, differentiate, find_boundaries, AnalysisError, CacheProfile, DerivativePoint,
    PatternResults,
};
pub use probe::{
    generate_chase, measure_latency, sweep, ChaseBuffer, ChaseTimer, LatencyData, PatternKind, ProbeError, SweepConfig,
};
pub use simcache::{simulate_chase, synthetic_sweep, CacheLevelSpec, HierarchySpec, SimTimer};
pub use tiler::{footprint, plan_tiles, tile_nest, LoopNest, TilePlan};
