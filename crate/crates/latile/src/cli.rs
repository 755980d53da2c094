//! Command-line front end.
//!
//! Exit codes: 0 success, 2 measurement failure, 3 insufficient data,
//! 4 input or schema error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use latile_core::analysis::AnalysisError;
use latile_core::kernels::{KernelName, KernelSpec, ProblemSize};
use latile_core::probe::ProbeError;
use latile_core::simcache::SimError;
use latile_core::tiler::{FootprintModel, PlanOptions, DEFAULT_SAFETY_FACTOR};
use latile_core::{
    build_profile, plan_tiles, sweep, ChaseTimer, HierarchySpec, LoopNest, PatternKind, PatternResults, SimTimer,
    SweepConfig,
};

use crate::bench::{self, BenchConfig};
use crate::formats::{self, FormatError, ProfileDocument};
use crate::hw::{self, InstantTimer};

pub const EXIT_MEASUREMENT: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl ToString) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::input(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input(e)
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        let code = match e {
            ProbeError::InvalidConfig(_) => EXIT_INPUT,
            _ => EXIT_MEASUREMENT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let code = match e {
            AnalysisError::InvalidSample(_) => EXIT_MEASUREMENT,
            _ => EXIT_INSUFFICIENT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Probe(p) => p.into(),
            other => CliError::input(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "latile", version, about = "Latency-profiled loop tiling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure the latency curve and write a profile document.
    Probe(ProbeArgs),
    /// Choose tile sizes for a loop nest.
    Plan(PlanArgs),
    /// Time tiled against untiled kernels.
    Bench(BenchArgs),
    /// Emit a profile's latency curves as CSV.
    Report(ReportArgs),
    /// Print a kernel's loop-nest model as JSON.
    Nest(NestArgs),
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, default_value_t = 1 << 10)]
    pub min_bytes: usize,
    #[arg(long, default_value_t = 128 << 20)]
    pub max_bytes: usize,
    #[arg(long, default_value_t = 4)]
    pub points_per_octave: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Chase stride in elements (raised to the next usable value per size).
    #[arg(long, default_value_t = latile_core::probe::DEFAULT_STRIDE_ELEMS)]
    pub stride: usize,
    /// Time chases with the cache simulator described by this hierarchy file.
    #[arg(long, value_name = "HIERARCHY_JSON")]
    pub simulate: Option<PathBuf>,
    /// Pin the probing thread to its current CPU (best effort).
    #[arg(long)]
    pub pin: bool,
    /// Detect boundaries on the raw curve instead of a 3-point median.
    /// Simulated curves are never smoothed.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value = "profile.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, env = "LATILE_PROFILE")]
    pub profile: PathBuf,
    /// Loop-nest JSON file.
    #[arg(long, required_unless_present = "kernel", conflicts_with = "kernel")]
    pub nest: Option<PathBuf>,
    /// Plan a built-in kernel's nest instead of a file.
    #[arg(long)]
    pub kernel: Option<KernelName>,
    #[arg(long, default_value = "bench")]
    pub size: ProblemSize,
    #[arg(long, default_value_t = DEFAULT_SAFETY_FACTOR)]
    pub safety: f64,
    /// Cache levels to tile for, innermost first.
    #[arg(long, default_value_t = 1)]
    pub levels: usize,
    /// Comma-separated loops eligible for tiling (default: all, or the
    /// kernel's tileable loops).
    #[arg(long, value_delimiter = ',')]
    pub tileable: Option<Vec<String>>,
    /// Round footprints up to whole lines of this many bytes.
    #[arg(long)]
    pub line_bytes: Option<u64>,
    /// Force a tile size, `loop=T` (repeatable).
    #[arg(long = "override", value_name = "LOOP=T")]
    pub overrides: Vec<String>,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the tiled nest (with control loops) here.
    #[arg(long)]
    pub tiled_nest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, env = "LATILE_PROFILE")]
    pub profile: PathBuf,
    /// Comma-separated kernel names (default: all eleven).
    #[arg(long, value_delimiter = ',')]
    pub kernels: Option<Vec<KernelName>>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value = "bench")]
    pub size: ProblemSize,
    #[arg(long, default_value_t = DEFAULT_SAFETY_FACTOR)]
    pub safety: f64,
    #[arg(long, default_value_t = 1)]
    pub levels: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Round footprints up to whole lines of this many bytes.
    #[arg(long)]
    pub line_bytes: Option<u64>,
    /// Write the CSV report here; printed after the table otherwise.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the full report, with plans and checksums, as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, env = "LATILE_PROFILE")]
    pub profile: PathBuf,
    /// Emit only this pattern's curve as `size_bytes,avg_ns`.
    #[arg(long)]
    pub pattern: Option<PatternKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NestArgs {
    pub kernel: KernelName,
    #[arg(long, default_value = "bench")]
    pub size: ProblemSize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Probe(a) => cmd_probe(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
        Command::Nest(a) => cmd_nest(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn host_label() -> String {
    std::fs::read_to_string("/proc/sys/kernel/hostname")
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

fn kib(bytes: usize) -> String {
    if bytes >= 1 << 20 && bytes.is_multiple_of(1 << 10) {
        format!("{:.1} MiB", bytes as f64 / (1u64 << 20) as f64)
    } else {
        format!("{:.1} KiB", bytes as f64 / 1024.0)
    }
}

pub fn cmd_probe(a: ProbeArgs) -> Result<(), CliError> {
    let config = SweepConfig {
        min_bytes: a.min_bytes,
        max_bytes: a.max_bytes,
        points_per_octave: a.points_per_octave,
        repetitions: a.reps,
        warmup_runs: a.warmup,
        stride_elems: a.stride,
        ..SweepConfig::default()
    };
    config.validate()?;
    let (mut timer, smooth, label, created_at): (Box<dyn ChaseTimer>, bool, String, u64) = match &a.simulate {
        Some(path) => {
            let spec: HierarchySpec = formats::read_json(path)?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            // Simulated runs are deterministic, so no timestamp.
            (Box::new(SimTimer::new(spec)?), false, format!("simulated:{name}"), 0)
        }
        None => {
            if a.pin && !hw::pin_current_thread() {
                eprintln!("warning: could not pin the probing thread");
            }
            let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            (Box::new(InstantTimer::new()), !a.raw, host_label(), now)
        }
    };
    let mut results: Vec<PatternResults> = Vec::with_capacity(2);
    for pattern in PatternKind::ALL {
        let data = sweep(timer.as_mut(), &config, pattern)?;
        results.push(PatternResults::analyze(pattern, data, smooth)?);
    }
    let sawtooth = results.pop().expect("two patterns");
    let cyclic = results.pop().expect("two patterns");
    let profile = build_profile(&cyclic, &sawtooth)?.with_metadata(created_at, label);
    let doc = ProfileDocument::new(profile, cyclic, sawtooth, config);
    formats::write_json(&a.out, &doc)?;
    let p = &doc.profile;
    println!("profile written to {}", a.out.display());
    for (i, (cap, conf)) in p.capacities().iter().zip(p.confidences).enumerate() {
        println!("L{}  {:>12}  confidence {:.3}", i + 1, kib(*cap), conf);
    }
    println!("L1 from {} pattern", p.source_pattern);
    Ok(())
}

fn parse_override(s: &str) -> Result<(String, i64), CliError> {
    let (name, t) = s
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("override `{s}` is not of the form loop=T")))?;
    let t = t
        .trim()
        .parse::<i64>()
        .map_err(|e| CliError::input(format!("override `{s}`: {e}")))?;
    Ok((name.trim().to_string(), t))
}

pub fn cmd_plan(a: PlanArgs) -> Result<(), CliError> {
    let doc = formats::load_profile(&a.profile)?;
    let (nest, default_tileable): (LoopNest, Option<Vec<String>>) = match (&a.nest, a.kernel) {
        (Some(path), _) => (formats::read_json(path)?, None),
        (None, Some(k)) => {
            let spec = KernelSpec::new(k, a.size);
            (spec.nest_model, Some(spec.tileable_loops))
        }
        (None, None) => return Err(CliError::input("either --nest or --kernel is required")),
    };
    let options = PlanOptions {
        levels: a.levels,
        tileable: a.tileable.clone().or(default_tileable),
        model: footprint_model(a.line_bytes),
        ..PlanOptions::default()
    };
    let mut plan = plan_tiles(&nest, &doc.profile, a.safety, &options).map_err(CliError::input)?;
    for o in &a.overrides {
        let (name, t) = parse_override(o)?;
        plan.override_tile(&nest, &name, t).map_err(CliError::input)?;
    }
    if let Some(path) = &a.tiled_nest {
        let tiled = latile_core::tile_nest(&nest, &plan).map_err(CliError::input)?;
        formats::write_json(path, &tiled)?;
    }
    match &a.out {
        Some(path) => formats::write_json(path, &plan)?,
        None => println!("{}", serde_json::to_string_pretty(&plan).map_err(CliError::input)?),
    }
    let summary: &mut dyn Write = if a.out.is_some() {
        &mut io::stdout()
    } else {
        &mut io::stderr()
    };
    if let Some(d) = &plan.diagnostic {
        writeln!(summary, "untiled: {d}")?;
    }
    for level in &plan.levels {
        let sizes: Vec<String> = level.tile_sizes.iter().map(|(n, t)| format!("{n}={t}")).collect();
        writeln!(
            summary,
            "L{} T={} [{}] footprint {} B of {} B",
            level.cache_level,
            level.tile,
            sizes.join(" "),
            level.footprint_bytes,
            level.capacity_bytes
        )?;
    }
    Ok(())
}

fn footprint_model(line_bytes: Option<u64>) -> FootprintModel {
    line_bytes.map_or(FootprintModel::Elements, |line_bytes| FootprintModel::Lines {
        line_bytes,
    })
}

pub fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let doc = formats::load_profile(&a.profile)?;
    let names = a.kernels.clone().unwrap_or_else(|| KernelName::ALL.to_vec());
    let specs: Vec<KernelSpec> = names.iter().map(|&k| KernelSpec::new(k, a.size)).collect();
    let config = BenchConfig {
        repetitions: a.reps,
        safety: a.safety,
        levels: a.levels,
        seed: a.seed,
        model: footprint_model(a.line_bytes),
        ..BenchConfig::default()
    };
    let report = bench::benchmark(&specs, &doc.profile, &config, bench::run_kernel).map_err(CliError::input)?;
    let mut stdout = io::stdout().lock();
    write!(stdout, "{}", report.table())?;
    match &a.csv {
        Some(path) => report.write_csv(output(Some(path))?).map_err(CliError::input)?,
        None => {
            writeln!(stdout)?;
            report.write_csv(&mut stdout).map_err(CliError::input)?;
        }
    }
    if let Some(path) = &a.json {
        formats::write_json(path, &report)?;
    }
    Ok(())
}

pub fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let doc = formats::load_profile(&a.profile)?;
    let out = output(a.out.as_deref())?;
    match a.pattern {
        Some(PatternKind::Cyclic) => formats::write_latency_csv(out, &doc.raw.cyclic.data)?,
        Some(PatternKind::Sawtooth) => formats::write_latency_csv(out, &doc.raw.sawtooth.data)?,
        None => formats::write_report_csv(out, &doc)?,
    }
    Ok(())
}

pub fn cmd_nest(a: NestArgs) -> Result<(), CliError> {
    let spec = KernelSpec::new(a.kernel, a.size);
    match &a.out {
        Some(path) => formats::write_json(path, &spec.nest_model)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&spec.nest_model).map_err(CliError::input)?
        ),
    }
    Ok(())
}
