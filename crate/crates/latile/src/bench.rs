//! Tiled versus untiled timing of the kernel suite.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use latile_core::kernels::{
    checksums_agree, geomean, median, InputMode, KernelError, KernelName, KernelResult, KernelSpec, Variant,
};
use latile_core::tiler::{FootprintModel, PlanOptions, TileError};
use latile_core::{plan_tiles, CacheProfile, TilePlan};

/// Relative checksum tolerance between the two variants.
pub const CHECKSUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark needs at least 3 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("{kernel}: {source}")]
    Plan {
        kernel: KernelName,
        #[source]
        source: TileError,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Runs one kernel variant once. Input generation is not timed.
pub fn run_kernel(
    spec: &KernelSpec,
    variant: Variant,
    plan: Option<&TilePlan>,
    seed: u64,
    mode: InputMode,
) -> Result<KernelResult, KernelError> {
    let mut prepared = spec.prepare(variant, plan, seed, mode)?;
    let start = Instant::now();
    prepared.run();
    let wall_time = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(KernelResult {
        name: spec.name,
        variant,
        wall_time,
        checksum: prepared.checksum(),
        plan_used: plan.filter(|_| variant == Variant::Tiled).cloned(),
    })
}

/// Plans a kernel's tiles against `profile`, restricted to its tileable loops.
/// Loops indexed by every access carry no reuse across iterations and stay
/// untiled.
pub fn plan_kernel(
    spec: &KernelSpec,
    profile: &CacheProfile,
    safety: f64,
    levels: usize,
    model: FootprintModel,
) -> Result<TilePlan, TileError> {
    let options = PlanOptions {
        levels,
        model,
        tileable: Some(spec.tileable_loops.clone()),
        exempt_no_reuse: true,
    };
    plan_tiles(&spec.nest_model, profile, safety, &options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub safety: f64,
    pub levels: usize,
    pub seed: u64,
    pub mode: InputMode,
    pub model: FootprintModel,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: 5,
            safety: latile_core::tiler::DEFAULT_SAFETY_FACTOR,
            levels: 1,
            seed: 42,
            mode: InputMode::Float,
            model: FootprintModel::Elements,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: KernelName,
    pub tiled_s: f64,
    pub untiled_s: f64,
    /// untiled / tiled.
    pub speedup: f64,
    pub status: Status,
    pub tiled_checksum: f64,
    pub untiled_checksum: f64,
    pub plan: TilePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// `debug` or `release`, for the binary that produced the timings.
    pub build: String,
}

/// `debug` when built without optimizations.
pub fn build_kind() -> &'static str {
    if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    }
}

impl BenchReport {
    /// Geometric mean speedup over kernels whose checksums agreed.
    pub fn geomean_speedup(&self) -> Option<f64> {
        let ok: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.status == Status::Ok)
            .map(|r| r.speedup)
            .collect();
        geomean(&ok)
    }

    /// `kernel,variant,median_s,speedup`, two rows per kernel. The speedup
    /// cell reads `FAILED` for kernels whose checksums diverged.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kernel", "variant", "median_s", "speedup"])?;
        for r in &self.rows {
            let speedup = match r.status {
                Status::Ok => r.speedup.to_string(),
                Status::Failed => "FAILED".to_string(),
            };
            w.write_record([r.name.as_str(), "untiled", &r.untiled_s.to_string(), &speedup])?;
            w.write_record([r.name.as_str(), "tiled", &r.tiled_s.to_string(), &speedup])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Human-readable table: benchmark, tiled, non tiled, speedup, status.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>14} {:>8}  Status",
            "Benchmark", "Tiled (s)", "Non Tiled (s)", "Speedup"
        );
        for r in &self.rows {
            let status = match r.status {
                Status::Ok => "ok",
                Status::Failed => "FAILED",
            };
            let _ = writeln!(
                s,
                "{:<12} {:>10.3} {:>14.3} {:>7.2}x  {}",
                r.name.as_str(),
                r.tiled_s,
                r.untiled_s,
                r.speedup,
                status
            );
        }
        match self.geomean_speedup() {
            Some(g) => {
                let _ = writeln!(s, "geomean speedup {g:.2}x ({} build)", self.build);
            }
            None => {
                let _ = writeln!(s, "geomean speedup n/a ({} build)", self.build);
            }
        }
        s
    }
}

/// Plans and times every kernel in `specs`, strictly one after another.
///
/// `runner` executes one variant; [`run_kernel`] is the normal choice and
/// tests substitute their own. Variants alternate within each repetition so
/// slow drift affects both alike.
pub fn benchmark<R>(
    specs: &[KernelSpec],
    profile: &CacheProfile,
    config: &BenchConfig,
    mut runner: R,
) -> Result<BenchReport, BenchError>
where
    R: FnMut(&KernelSpec, Variant, Option<&TilePlan>, u64, InputMode) -> Result<KernelResult, KernelError>,
{
    if config.repetitions < 3 {
        return Err(BenchError::TooFewRepetitions(config.repetitions));
    }
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let plan = plan_kernel(spec, profile, config.safety, config.levels, config.model).map_err(|source| {
            BenchError::Plan {
                kernel: spec.name,
                source,
            }
        })?;
        let mut tiled = Vec::with_capacity(config.repetitions);
        let mut untiled = Vec::with_capacity(config.repetitions);
        let (mut tiled_sum, mut untiled_sum) = (0.0, 0.0);
        for _ in 0..config.repetitions {
            let u = runner(spec, Variant::Untiled, None, config.seed, config.mode)?;
            let t = runner(spec, Variant::Tiled, Some(&plan), config.seed, config.mode)?;
            untiled.push(u.wall_time);
            tiled.push(t.wall_time);
            untiled_sum = u.checksum;
            tiled_sum = t.checksum;
        }
        let tiled_s = median(&tiled).unwrap_or(f64::NAN);
        let untiled_s = median(&untiled).unwrap_or(f64::NAN);
        let status = if checksums_agree(tiled_sum, untiled_sum, CHECKSUM_TOLERANCE) {
            Status::Ok
        } else {
            Status::Failed
        };
        rows.push(BenchRow {
            name: spec.name,
            tiled_s,
            untiled_s,
            speedup: untiled_s / tiled_s,
            status,
            tiled_checksum: tiled_sum,
            untiled_checksum: untiled_sum,
            plan,
        });
    }
    Ok(BenchReport {
        rows,
        build: build_kind().to_string(),
    })
}
