//! Benchmark kernels (a PolyBench subset) in untiled and tiled form.
//!
//! Every kernel carries a [`LoopNest`] model of its dominant loop nest, used
//! to plan tiles, and the subset of loops that may be tiled. Running a kernel
//! is split into [`KernelSpec::prepare`] (allocation and seeded input
//! generation) and [`Prepared::run`], so callers can time the compute alone.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tiler::{AccessMode, AffineExpr, ArrayAccess, Loop, LoopNest, TilePlan};

pub mod linalg;
pub mod stencil;
pub mod tiles;

pub use linalg::{Atax, Bicg, Covariance, Doitgen, Gemm, Syrk, ThreeMm, TwoMm};
pub use stencil::{Fdtd2d, Jacobi2d, Seidel2d};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("kernel {kernel} needs dimension `{dim}`")]
    MissingDim { kernel: KernelName, dim: &'static str },
    #[error("kernel {kernel}: dimension `{dim}` = {value} is too small (minimum {min})")]
    DimTooSmall {
        kernel: KernelName,
        dim: &'static str,
        value: usize,
        min: usize,
    },
    #[error("the tiled variant needs a tile plan")]
    PlanRequired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelName {
    #[serde(rename = "3mm")]
    ThreeMm,
    #[serde(rename = "2mm")]
    TwoMm,
    #[serde(rename = "gemm")]
    Gemm,
    #[serde(rename = "syrk")]
    Syrk,
    #[serde(rename = "covariance")]
    Covariance,
    #[serde(rename = "doitgen")]
    Doitgen,
    #[serde(rename = "seidel-2d")]
    Seidel2d,
    #[serde(rename = "bicg")]
    Bicg,
    #[serde(rename = "fdtd-2d")]
    Fdtd2d,
    #[serde(rename = "atax")]
    Atax,
    #[serde(rename = "jacobi-2d")]
    Jacobi2d,
}

impl KernelName {
    /// Registry order.
    pub const ALL: [KernelName; 11] = [
        KernelName::ThreeMm,
        KernelName::TwoMm,
        KernelName::Gemm,
        KernelName::Syrk,
        KernelName::Covariance,
        KernelName::Doitgen,
        KernelName::Seidel2d,
        KernelName::Bicg,
        KernelName::Fdtd2d,
        KernelName::Atax,
        KernelName::Jacobi2d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::ThreeMm => "3mm",
            KernelName::TwoMm => "2mm",
            KernelName::Gemm => "gemm",
            KernelName::Syrk => "syrk",
            KernelName::Covariance => "covariance",
            KernelName::Doitgen => "doitgen",
            KernelName::Seidel2d => "seidel-2d",
            KernelName::Bicg => "bicg",
            KernelName::Fdtd2d => "fdtd-2d",
            KernelName::Atax => "atax",
            KernelName::Jacobi2d => "jacobi-2d",
        }
    }

    /// Dimension names, in the order presets list them.
    pub fn dims(self) -> &'static [&'static str] {
        match self {
            KernelName::Gemm => &["ni", "nj", "nk"],
            KernelName::TwoMm => &["ni", "nj", "nk", "nl"],
            KernelName::ThreeMm => &["ni", "nj", "nk", "nl", "nm"],
            KernelName::Syrk | KernelName::Covariance | KernelName::Bicg | KernelName::Atax => &["m", "n"],
            KernelName::Doitgen => &["nr", "nq", "np"],
            KernelName::Seidel2d | KernelName::Jacobi2d => &["tsteps", "n"],
            KernelName::Fdtd2d => &["tmax", "nx", "ny"],
        }
    }

    /// Loops that may be tiled. Time loops are never tiled, and seidel-2d's
    /// in-place sweep only allows strip-mining its row loop.
    pub fn tileable_loops(self) -> &'static [&'static str] {
        self.tile_slots().split(|s| s.is_empty()).next().unwrap_or(&[])
    }

    /// Loop names bound to the three tile slots of [`KernelInstance::run`].
    fn tile_slots(self) -> &'static [&'static str; 3] {
        match self {
            KernelName::Gemm | KernelName::Syrk => &["i", "k", "j"],
            KernelName::TwoMm | KernelName::ThreeMm | KernelName::Covariance => &["i", "j", "k"],
            KernelName::Doitgen => &["p", "s", ""],
            KernelName::Bicg | KernelName::Atax | KernelName::Fdtd2d | KernelName::Jacobi2d => &["i", "j", ""],
            KernelName::Seidel2d => &["i", "", ""],
        }
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelName {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| KernelError::UnknownKernel(s.to_string()))
    }
}

/// Dataset presets. `Mini` to `Large` follow the usual PolyBench extents;
/// `Bench` is `Large` with fewer time steps for the stencils so a full suite
/// run stays within minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemSize {
    Mini,
    Small,
    Medium,
    Large,
    Bench,
}

impl FromStr for ProblemSize {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mini" => Ok(ProblemSize::Mini),
            "small" => Ok(ProblemSize::Small),
            "medium" => Ok(ProblemSize::Medium),
            "large" => Ok(ProblemSize::Large),
            "bench" => Ok(ProblemSize::Bench),
            _ => Err("expected one of mini, small, medium, large, bench"),
        }
    }
}

fn preset(name: KernelName, size: ProblemSize) -> &'static [usize] {
    use KernelName as K;
    use ProblemSize as P;
    match (name, size) {
        (K::Gemm, P::Mini) => &[20, 25, 30],
        (K::Gemm, P::Small) => &[60, 70, 80],
        (K::Gemm, P::Medium) => &[200, 220, 240],
        (K::Gemm, P::Large) => &[1000, 1100, 1200],
        (K::Gemm, P::Bench) => &[1200, 1300, 1400],
        (K::TwoMm, P::Mini) => &[16, 18, 22, 24],
        (K::TwoMm, P::Small) => &[40, 50, 70, 80],
        (K::TwoMm, P::Medium) => &[180, 190, 210, 220],
        (K::TwoMm, P::Large | P::Bench) => &[800, 900, 1100, 1200],
        (K::ThreeMm, P::Mini) => &[16, 18, 20, 22, 24],
        (K::ThreeMm, P::Small) => &[40, 50, 60, 70, 80],
        (K::ThreeMm, P::Medium) => &[180, 190, 200, 210, 220],
        (K::ThreeMm, P::Large | P::Bench) => &[800, 900, 1000, 1100, 1200],
        (K::Syrk, P::Mini) => &[20, 30],
        (K::Syrk, P::Small) => &[60, 80],
        (K::Syrk, P::Medium) => &[200, 240],
        (K::Syrk, P::Large | P::Bench) => &[1000, 1200],
        (K::Covariance, P::Mini) => &[28, 32],
        (K::Covariance, P::Small) => &[80, 100],
        (K::Covariance, P::Medium) => &[240, 260],
        (K::Covariance, P::Large | P::Bench) => &[1200, 1400],
        (K::Doitgen, P::Mini) => &[10, 8, 12],
        (K::Doitgen, P::Small) => &[25, 20, 30],
        (K::Doitgen, P::Medium) => &[50, 40, 60],
        (K::Doitgen, P::Large | P::Bench) => &[150, 140, 160],
        (K::Seidel2d, P::Mini) => &[20, 40],
        (K::Seidel2d, P::Small) => &[40, 120],
        (K::Seidel2d, P::Medium) => &[100, 400],
        (K::Seidel2d, P::Large) => &[500, 2000],
        (K::Seidel2d, P::Bench) => &[40, 2000],
        (K::Bicg, P::Mini) => &[38, 42],
        (K::Bicg, P::Small) => &[116, 124],
        (K::Bicg, P::Medium) => &[390, 410],
        (K::Bicg, P::Large) => &[1900, 2100],
        (K::Bicg, P::Bench) => &[3800, 4200],
        (K::Fdtd2d, P::Mini) => &[20, 20, 30],
        (K::Fdtd2d, P::Small) => &[40, 60, 80],
        (K::Fdtd2d, P::Medium) => &[100, 200, 240],
        (K::Fdtd2d, P::Large) => &[500, 1000, 1200],
        (K::Fdtd2d, P::Bench) => &[100, 1000, 1200],
        (K::Atax, P::Mini) => &[38, 42],
        (K::Atax, P::Small) => &[116, 124],
        (K::Atax, P::Medium) => &[390, 410],
        (K::Atax, P::Large) => &[1900, 2100],
        (K::Atax, P::Bench) => &[3800, 4200],
        (K::Jacobi2d, P::Mini) => &[20, 30],
        (K::Jacobi2d, P::Small) => &[40, 90],
        (K::Jacobi2d, P::Medium) => &[100, 250],
        (K::Jacobi2d, P::Large) => &[500, 1300],
        (K::Jacobi2d, P::Bench) => &[100, 1300],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Untiled,
    Tiled,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Untiled => "untiled",
            Variant::Tiled => "tiled",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distribution of generated inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Uniform in `[0, 1)`; scalars as in PolyBench (alpha 1.5, beta 1.2).
    #[default]
    Float,
    /// Integers in `-3..=3` with dyadic scalars (alpha 1.5, beta 1.25), so
    /// matrix products are computed exactly.
    SmallInt,
}

/// Seeded input generator shared by the kernel constructors.
pub struct Inputs {
    rng: ChaCha8Rng,
    mode: InputMode,
}

impl Inputs {
    pub fn new(seed: u64, mode: InputMode) -> Self {
        Inputs {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mode,
        }
    }

    pub fn array(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.value()).collect()
    }

    fn value(&mut self) -> f64 {
        match self.mode {
            InputMode::Float => self.rng.gen::<f64>(),
            InputMode::SmallInt => self.rng.gen_range(-3i32..=3) as f64,
        }
    }

    fn alpha(&self) -> f64 {
        1.5
    }

    fn beta(&self) -> f64 {
        match self.mode {
            InputMode::Float => 1.2,
            InputMode::SmallInt => 1.25,
        }
    }
}

/// An initialised kernel.
///
/// `levels` holds tile sizes per cache level (innermost first) for the
/// kernel's three tile slots; an empty slice runs the original loop order.
pub trait KernelInstance {
    fn run(&mut self, levels: &[[usize; 3]]);
    /// Sum of all output array elements.
    fn checksum(&self) -> f64;
}

pub(crate) fn clamp_levels(levels: &[[usize; 3]], extents: [usize; 3]) -> Vec<[usize; 3]> {
    levels
        .iter()
        .map(|l| core::array::from_fn(|d| l[d].clamp(1, extents[d].max(1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: KernelName,
    pub problem_size: BTreeMap<String, usize>,
    pub nest_model: LoopNest,
    pub tileable_loops: Vec<String>,
}

impl KernelSpec {
    pub fn new(name: KernelName, size: ProblemSize) -> Self {
        let dims = name
            .dims()
            .iter()
            .zip(preset(name, size))
            .map(|(d, &v)| (d.to_string(), v))
            .collect();
        Self::with_dims(name, dims).expect("presets are valid")
    }

    pub fn with_dims(name: KernelName, problem_size: BTreeMap<String, usize>) -> Result<Self, KernelError> {
        let get = |dim: &'static str| {
            problem_size
                .get(dim)
                .copied()
                .ok_or(KernelError::MissingDim { kernel: name, dim })
        };
        for &dim in name.dims() {
            let value = get(dim)?;
            let min = match (name, dim) {
                (KernelName::Seidel2d | KernelName::Jacobi2d, "n") => 3,
                (KernelName::Fdtd2d, "nx" | "ny") => 2,
                (KernelName::Covariance, "n") => 2,
                _ => 1,
            };
            if value < min {
                return Err(KernelError::DimTooSmall {
                    kernel: name,
                    dim,
                    value,
                    min,
                });
            }
        }
        let d = |dim: &'static str| problem_size[dim] as i64;
        let nest_model = nest_model(name, &d);
        Ok(KernelSpec {
            name,
            tileable_loops: name.tileable_loops().iter().map(|s| s.to_string()).collect(),
            problem_size,
            nest_model,
        })
    }

    pub fn dim(&self, name: &str) -> usize {
        self.problem_size.get(name).copied().unwrap_or(0)
    }

    /// Allocates and initialises the kernel's arrays from `seed`.
    pub fn instantiate(&self, seed: u64, mode: InputMode) -> Box<dyn KernelInstance + Send> {
        let mut inputs = Inputs::new(seed, mode);
        let d = |n: &str| self.dim(n);
        match self.name {
            KernelName::Gemm => Box::new(Gemm::init(d("ni"), d("nj"), d("nk"), &mut inputs)),
            KernelName::TwoMm => Box::new(TwoMm::init(d("ni"), d("nj"), d("nk"), d("nl"), &mut inputs)),
            KernelName::ThreeMm => Box::new(ThreeMm::init(d("ni"), d("nj"), d("nk"), d("nl"), d("nm"), &mut inputs)),
            KernelName::Syrk => Box::new(Syrk::init(d("n"), d("m"), &mut inputs)),
            KernelName::Covariance => Box::new(Covariance::init(d("m"), d("n"), &mut inputs)),
            KernelName::Doitgen => Box::new(Doitgen::init(d("nr"), d("nq"), d("np"), &mut inputs)),
            KernelName::Seidel2d => Box::new(Seidel2d::init(d("tsteps"), d("n"), &mut inputs)),
            KernelName::Bicg => Box::new(Bicg::init(d("m"), d("n"), &mut inputs)),
            KernelName::Fdtd2d => Box::new(Fdtd2d::init(d("tmax"), d("nx"), d("ny"), &mut inputs)),
            KernelName::Atax => Box::new(Atax::init(d("m"), d("n"), &mut inputs)),
            KernelName::Jacobi2d => Box::new(Jacobi2d::init(d("tsteps"), d("n"), &mut inputs)),
        }
    }

    /// Tile sizes for the kernel's tile slots, one entry per plan level.
    pub fn tile_levels(&self, plan: &TilePlan) -> Vec<[usize; 3]> {
        let slots = self.name.tile_slots();
        let extents: [usize; 3] = core::array::from_fn(|d| {
            self.nest_model
                .find_loop(slots[d])
                .map_or(1, |l| l.extent().max(1) as usize)
        });
        let maps: Vec<BTreeMap<String, i64>> = plan.levels.iter().map(|l| l.tile_sizes.clone()).collect();
        tiles::level_sizes(&maps, *slots, extents)
    }

    /// Initialises the kernel and binds the variant's tiling.
    pub fn prepare(
        &self,
        variant: Variant,
        plan: Option<&TilePlan>,
        seed: u64,
        mode: InputMode,
    ) -> Result<Prepared, KernelError> {
        let levels = match variant {
            Variant::Untiled => Vec::new(),
            Variant::Tiled => self.tile_levels(plan.ok_or(KernelError::PlanRequired)?),
        };
        Ok(Prepared {
            instance: self.instantiate(seed, mode),
            levels,
        })
    }

    /// Runs the kernel once and returns its checksum.
    pub fn execute(
        &self,
        variant: Variant,
        plan: Option<&TilePlan>,
        seed: u64,
        mode: InputMode,
    ) -> Result<f64, KernelError> {
        let mut p = self.prepare(variant, plan, seed, mode)?;
        p.run();
        Ok(p.checksum())
    }
}

pub struct Prepared {
    instance: Box<dyn KernelInstance + Send>,
    levels: Vec<[usize; 3]>,
}

impl Prepared {
    pub fn run(&mut self) {
        self.instance.run(&self.levels);
    }

    pub fn checksum(&self) -> f64 {
        self.instance.checksum()
    }

    pub fn levels(&self) -> &[[usize; 3]] {
        &self.levels
    }
}

fn acc(array: &str, idx: &[(&str, i64)], mode: AccessMode) -> ArrayAccess {
    let indices = idx
        .iter()
        .map(|&(v, c)| {
            if v.is_empty() {
                AffineExpr::constant(c)
            } else {
                AffineExpr::offset(v, c)
            }
        })
        .collect();
    ArrayAccess::new(array, indices, mode)
}

fn nest_model(name: KernelName, d: &dyn Fn(&'static str) -> i64) -> LoopNest {
    use AccessMode::{Read as R, ReadWrite as RW, Write as W};
    let l = Loop::new;
    let (loops, accesses, body_flops) = match name {
        KernelName::Gemm => (
            vec![l("i", 0, d("ni")), l("k", 0, d("nk")), l("j", 0, d("nj"))],
            vec![
                acc("C", &[("i", 0), ("j", 0)], RW),
                acc("A", &[("i", 0), ("k", 0)], R),
                acc("B", &[("k", 0), ("j", 0)], R),
            ],
            3,
        ),
        KernelName::TwoMm => (
            vec![l("i", 0, d("ni")), l("j", 0, d("nj")), l("k", 0, d("nk"))],
            vec![
                acc("tmp", &[("i", 0), ("j", 0)], RW),
                acc("A", &[("i", 0), ("k", 0)], R),
                acc("B", &[("k", 0), ("j", 0)], R),
            ],
            3,
        ),
        KernelName::ThreeMm => (
            vec![l("i", 0, d("ni")), l("j", 0, d("nj")), l("k", 0, d("nk"))],
            vec![
                acc("E", &[("i", 0), ("j", 0)], RW),
                acc("A", &[("i", 0), ("k", 0)], R),
                acc("B", &[("k", 0), ("j", 0)], R),
            ],
            2,
        ),
        KernelName::Syrk => (
            vec![l("i", 0, d("n")), l("k", 0, d("m")), l("j", 0, d("n"))],
            vec![
                acc("C", &[("i", 0), ("j", 0)], RW),
                acc("A", &[("i", 0), ("k", 0)], R),
                acc("A", &[("j", 0), ("k", 0)], R),
            ],
            3,
        ),
        KernelName::Covariance => (
            vec![l("i", 0, d("m")), l("j", 0, d("m")), l("k", 0, d("n"))],
            vec![
                acc("cov", &[("i", 0), ("j", 0)], RW),
                acc("data", &[("k", 0), ("i", 0)], R),
                acc("data", &[("k", 0), ("j", 0)], R),
            ],
            2,
        ),
        KernelName::Doitgen => (
            vec![
                l("r", 0, d("nr")),
                l("q", 0, d("nq")),
                l("p", 0, d("np")),
                l("s", 0, d("np")),
            ],
            vec![
                acc("sum", &[("p", 0)], RW),
                acc("A", &[("r", 0), ("q", 0), ("s", 0)], R),
                acc("C4", &[("s", 0), ("p", 0)], R),
            ],
            2,
        ),
        KernelName::Seidel2d => {
            let mut accesses = Vec::new();
            for di in -1..=1 {
                for dj in -1..=1 {
                    let mode = if di == 0 && dj == 0 { RW } else { R };
                    accesses.push(acc("A", &[("i", di), ("j", dj)], mode));
                }
            }
            (
                vec![l("t", 0, d("tsteps")), l("i", 1, d("n") - 1), l("j", 1, d("n") - 1)],
                accesses,
                9,
            )
        }
        KernelName::Bicg => (
            vec![l("i", 0, d("n")), l("j", 0, d("m"))],
            vec![
                acc("s", &[("j", 0)], RW),
                acc("r", &[("i", 0)], R),
                acc("A", &[("i", 0), ("j", 0)], R),
                acc("q", &[("i", 0)], RW),
                acc("p", &[("j", 0)], R),
            ],
            4,
        ),
        KernelName::Fdtd2d => (
            vec![l("t", 0, d("tmax")), l("i", 0, d("nx") - 1), l("j", 0, d("ny") - 1)],
            vec![
                acc("hz", &[("i", 0), ("j", 0)], RW),
                acc("ex", &[("i", 0), ("j", 1)], R),
                acc("ex", &[("i", 0), ("j", 0)], R),
                acc("ey", &[("i", 1), ("j", 0)], R),
                acc("ey", &[("i", 0), ("j", 0)], R),
            ],
            5,
        ),
        KernelName::Atax => (
            vec![l("i", 0, d("m")), l("j", 0, d("n"))],
            vec![
                acc("tmp", &[("i", 0)], RW),
                acc("A", &[("i", 0), ("j", 0)], R),
                acc("x", &[("j", 0)], R),
                acc("y", &[("j", 0)], RW),
            ],
            4,
        ),
        KernelName::Jacobi2d => (
            vec![l("t", 0, d("tsteps")), l("i", 1, d("n") - 1), l("j", 1, d("n") - 1)],
            vec![
                acc("B", &[("i", 0), ("j", 0)], W),
                acc("A", &[("i", 0), ("j", 0)], R),
                acc("A", &[("i", 0), ("j", -1)], R),
                acc("A", &[("i", 0), ("j", 1)], R),
                acc("A", &[("i", 1), ("j", 0)], R),
                acc("A", &[("i", -1), ("j", 0)], R),
            ],
            5,
        ),
    };
    LoopNest {
        loops,
        accesses,
        body_flops,
    }
}

/// Wall time and checksum of one kernel run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub name: KernelName,
    pub variant: Variant,
    /// Seconds.
    pub wall_time: f64,
    pub checksum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_used: Option<TilePlan>,
}

/// Median of `xs` (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

pub fn geomean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() || xs.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let log_sum: f64 = xs.iter().map(|&x| libm::log(x)).sum();
    Some(libm::exp(log_sum / xs.len() as f64))
}

/// Whether two checksums agree within `rel_tol`, relative to the larger
/// magnitude (absolute near zero).
pub fn checksums_agree(a: f64, b: f64, rel_tol: f64) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return false;
    }
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= rel_tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiler::{TileLevel, TilePlan};

    fn uniform_plan(spec: &KernelSpec, t: i64) -> TilePlan {
        TilePlan {
            levels: vec![TileLevel {
                cache_level: 1,
                tile: t,
                tile_sizes: spec.tileable_loops.iter().map(|n| (n.clone(), t)).collect(),
                footprint_bytes: 0,
                capacity_bytes: 0,
            }],
            safety_factor: 0.5,
            model: Default::default(),
            exempt_loops: vec![],
            diagnostic: None,
        }
    }

    #[test]
    fn gemm_identity() {
        for levels in [vec![], vec![[1, 1, 1]], vec![[1, 2, 1]]] {
            let mut g = Gemm {
                ni: 2,
                nj: 2,
                nk: 2,
                alpha: 1.0,
                beta: 0.0,
                a: vec![1.0, 0.0, 0.0, 1.0],
                b: vec![1.0, 0.0, 0.0, 1.0],
                c: vec![0.0; 4],
            };
            g.run(&levels);
            assert_eq!(g.c, [1.0, 0.0, 0.0, 1.0]);
            assert_eq!(g.checksum(), 2.0);
        }
    }

    #[test]
    fn atax_scalar() {
        for levels in [vec![], vec![[1, 1, 1]]] {
            let mut k = Atax {
                m: 1,
                n: 1,
                a: vec![2.0],
                x: vec![3.0],
                y: vec![0.0],
                tmp: vec![0.0],
            };
            k.run(&levels);
            assert_eq!(k.y, [12.0]);
            assert_eq!(k.checksum(), 12.0);
        }
    }

    #[test]
    fn jacobi_all_ones_stays_ones() {
        for levels in [vec![], vec![[1, 1, 1]]] {
            let mut k = Jacobi2d {
                tsteps: 1,
                n: 4,
                a: vec![1.0; 16],
                b: vec![1.0; 16],
            };
            k.run(&levels);
            // 0.2 * 5 rounds to exactly 1.0.
            assert!(k.a.iter().all(|&x| x == 1.0));
            assert_eq!(k.checksum(), 16.0);
        }
    }

    #[test]
    fn registry_is_complete() {
        assert_eq!(KernelName::ALL.len(), 11);
        for k in KernelName::ALL {
            assert_eq!(k.as_str().parse::<KernelName>().unwrap(), k);
            let spec = KernelSpec::new(k, ProblemSize::Mini);
            spec.nest_model.validate().unwrap();
            assert!(!spec.tileable_loops.is_empty());
            for t in &spec.tileable_loops {
                assert!(spec.nest_model.find_loop(t).is_some(), "{k}: {t}");
            }
        }
        assert_eq!(KernelName::Seidel2d.tileable_loops(), ["i"]);
        assert_eq!(KernelName::Doitgen.tileable_loops(), ["p", "s"]);
        assert!("lu".parse::<KernelName>().is_err());
    }

    #[test]
    fn variants_agree_bit_exactly_on_mini() {
        for k in KernelName::ALL {
            let spec = KernelSpec::new(k, ProblemSize::Mini);
            let untiled = spec.execute(Variant::Untiled, None, 7, InputMode::Float).unwrap();
            for t in [1, 3, 8] {
                let plan = uniform_plan(&spec, t);
                let tiled = spec.execute(Variant::Tiled, Some(&plan), 7, InputMode::Float).unwrap();
                assert_eq!(untiled.to_bits(), tiled.to_bits(), "{k} T={t}: {untiled} vs {tiled}");
            }
        }
    }

    #[test]
    fn tiled_needs_a_plan() {
        let spec = KernelSpec::new(KernelName::Gemm, ProblemSize::Mini);
        assert_eq!(
            spec.execute(Variant::Tiled, None, 1, InputMode::Float),
            Err(KernelError::PlanRequired)
        );
    }

    #[test]
    fn dims_are_validated() {
        let mut dims: BTreeMap<String, usize> = [("tsteps".to_string(), 2), ("n".to_string(), 2)].into_iter().collect();
        assert!(matches!(
            KernelSpec::with_dims(KernelName::Jacobi2d, dims.clone()),
            Err(KernelError::DimTooSmall { .. })
        ));
        dims.remove("n");
        assert!(matches!(
            KernelSpec::with_dims(KernelName::Jacobi2d, dims),
            Err(KernelError::MissingDim { .. })
        ));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let g = geomean(&[2.0, 8.0]).unwrap();
        assert!((g - 4.0).abs() < 1e-12);
        assert!(checksums_agree(1e6, 1e6 + 0.5, 1e-6));
        assert!(!checksums_agree(1e6, 1e6 + 2.0, 1e-6));
        assert!(!checksums_agree(f64::NAN, 1.0, 1e-6));
    }
}
