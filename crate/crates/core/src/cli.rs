//! Batch front-end: single runs, multi-seed runs and parameter sweeps with
//! CSV output.
//!
//! Per run, `trace_<scheme>_<seed>.csv` holds one row per simulated slot:
//!
//! ```text
//! slot,normalized_p,transmitters,switches,subnetworks
//! ```
//!
//! `normalized_p` is `P(t) / NM` with six decimals. Every run also adds one
//! row to `summary.csv` in the output root. Sweep points write their traces
//! into a sub-directory named after the swept values, e.g. `N=10_L=1000`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{parse_config, ConfigError, ScenarioConfig, Scheme};
use crate::metrics::{average_delay, per_slot_series, Trace};
use crate::protocol::{simulate, SimError};

pub const TRACE_HEADER: &str = "slot,normalized_p,transmitters,switches,subnetworks";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config `{path}`: {source}")]
    ReadConfig { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("sweep `{spec}`: {reason}")]
    Sweep { spec: String, reason: String },
    #[error("point {point}, seed {seed}: {source}")]
    Simulation { point: String, seed: u64, source: SimError },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Config(_) | CliError::Sweep { .. } => 2,
            CliError::Simulation { .. } | CliError::Write { .. } | CliError::Pool(_) => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Proposed,
    Baseline,
    Both,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Proposed => vec![Scheme::Proposed],
            SchemeArg::Baseline => vec![Scheme::Baseline],
            SchemeArg::Both => vec![Scheme::Proposed, Scheme::Baseline],
        }
    }
}

/// Simulate popular content distribution over a V2V highway platoon.
#[derive(Clone, Debug, Parser)]
#[command(name = "pcdsim", version)]
pub struct Args {
    /// Scenario file in `key = value` format; omitted keys take defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Scheme to run; defaults to the config's `scheme` key.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// First seed; defaults to the config's `seed` key.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Consecutive seeds per point; defaults to the config's `seeds` key.
    #[arg(long, value_name = "COUNT")]
    pub seeds: Option<usize>,
    /// Override a key with a list of values, e.g. `N=5:30:5` or `D=140,200`.
    /// Repeat for a Cartesian product.
    #[arg(long, value_name = "KEY=LIST")]
    pub sweep: Vec<String>,
    /// Set `L` to this many metres per OBU at every point.
    #[arg(long, value_name = "METRES")]
    pub length_per_obu: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Slot horizon, overriding `t_max`.
    #[arg(long, value_name = "SLOTS")]
    pub t_max: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

/// A key with the values it takes across the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `KEY=a,b,c` where each item is a value or an inclusive
/// `start:end:step` range.
pub fn parse_sweep(spec: &str) -> Result<SweepAxis, CliError> {
    let fail = |reason: &str| CliError::Sweep { spec: spec.to_string(), reason: reason.to_string() };
    let (key, list) = spec.split_once('=').ok_or_else(|| fail("expected KEY=LIST"))?;
    let key = key.trim();
    if !crate::config::KEYS.contains(&key) {
        return Err(fail("unknown key"));
    }
    let mut values = Vec::new();
    for item in list.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(fail("empty list item"));
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [_] => values.push(item.to_string()),
            [start, end, step] => {
                let num = |s: &str| s.trim().parse::<f64>().map_err(|_| fail("range bounds must be numeric"));
                let (start, end, step) = (num(start)?, num(end)?, num(step)?);
                if !(step > 0.0) || end < start {
                    return Err(fail("range needs start <= end and step > 0"));
                }
                let count = ((end - start) / step + 1e-9).floor() as usize;
                values.extend((0..=count).map(|k| format_number(start + k as f64 * step)));
            }
            _ => return Err(fail("range must be start:end:step")),
        }
    }
    Ok(SweepAxis { key: key.to_string(), values })
}

fn format_number(x: f64) -> String {
    let rounded = (x * 1e9).round() / 1e9;
    rounded.to_string()
}

/// One fully resolved scenario of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    /// `key=value` pairs, empty for a single run.
    pub label: Vec<(String, String)>,
    pub config: ScenarioConfig,
}

impl SweepPoint {
    pub fn dir_name(&self) -> String {
        self.label.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("_")
    }
}

/// Expands the axes into their Cartesian product, last axis fastest, and
/// validates every resulting configuration.
pub fn expand_points(
    base: &ScenarioConfig,
    axes: &[SweepAxis],
    length_per_obu: Option<f64>,
) -> Result<Vec<SweepPoint>, CliError> {
    let mut points = vec![SweepPoint { label: Vec::new(), config: base.clone() }];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for point in &points {
            for value in &axis.values {
                let mut p = point.clone();
                p.config.set(&axis.key, value)?;
                p.label.push((axis.key.clone(), value.clone()));
                next.push(p);
            }
        }
        points = next;
    }
    for p in &mut points {
        if let Some(per) = length_per_obu {
            p.config.fleet_length = per * p.config.vehicles as f64;
            if !p.label.is_empty() {
                p.label.push(("L".into(), format_number(p.config.fleet_length)));
            }
        }
        p.config.validate()?;
    }
    Ok(points)
}

/// Renders a trace as the per-slot CSV.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for row in per_slot_series(trace) {
        writeln!(
            out,
            "{},{:.6},{},{},{}",
            row.slot, row.normalized, row.transmitters, row.switches, row.subnetworks
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub point: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub vehicles: usize,
    pub fleet_length: f64,
    pub rsu_diameter: f64,
    pub average_delay: f64,
    pub complete: bool,
    pub completion_slot: Option<u64>,
    pub completion_fraction: f64,
    pub total_switches: usize,
    pub wall_secs: f64,
}

pub const SUMMARY_HEADER: &str = "point,scheme,seed,N,L,D,average_delay_s,complete,completion_slot,\
completion_fraction,total_switches,wall_time_s";

impl SummaryRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.4},{},{},{:.6},{},{:.3}",
            self.point,
            self.scheme,
            self.seed,
            self.vehicles,
            self.fleet_length,
            self.rsu_diameter,
            self.average_delay,
            self.complete,
            self.completion_slot.map_or(String::new(), |s| s.to_string()),
            self.completion_fraction,
            self.total_switches,
            self.wall_secs,
        )
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let wrap = |source| CliError::Write { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(wrap)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(wrap)?;
    fs::rename(&tmp, path).map_err(wrap)
}

struct Job<'a> {
    point: &'a SweepPoint,
    scheme: Scheme,
    seed: u64,
}

/// Runs every (point, scheme, seed) combination and writes all outputs.
/// Rows come back in job order regardless of thread scheduling.
pub fn execute(args: &Args) -> Result<Vec<SummaryRow>, CliError> {
    let mut base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|source| CliError::ReadConfig { path: path.clone(), source })?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(t) = args.t_max {
        base.t_max = t;
    }
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    if let Some(count) = args.seeds {
        base.seeds = count;
    }
    base.validate()?;
    let schemes = match args.scheme {
        Some(s) => s.schemes(),
        None => vec![base.scheme],
    };
    let axes = args.sweep.iter().map(|s| parse_sweep(s)).collect::<Result<Vec<_>, _>>()?;
    let points = expand_points(&base, &axes, args.length_per_obu)?;

    let jobs: Vec<Job> = points
        .iter()
        .flat_map(|point| {
            schemes.iter().flat_map(move |&scheme| {
                (0..point.config.seeds as u64).map(move |k| Job {
                    point,
                    scheme,
                    seed: point.config.seed.wrapping_add(k),
                })
            })
        })
        .collect();

    let run_job = |job: &Job| -> Result<SummaryRow, CliError> {
        let started = Instant::now();
        let name = job.point.dir_name();
        let trace = simulate(&job.point.config, job.scheme, job.seed).map_err(|source| {
            CliError::Simulation { point: name.clone(), seed: job.seed, source }
        })?;
        let dir = if name.is_empty() { args.out.clone() } else { args.out.join(&name) };
        write_atomic(&dir.join(format!("trace_{}_{}.csv", job.scheme, job.seed)), &trace_csv(&trace))?;
        let delay = average_delay(&trace);
        let c = &job.point.config;
        Ok(SummaryRow {
            point: name,
            scheme: job.scheme,
            seed: job.seed,
            vehicles: c.vehicles,
            fleet_length: c.fleet_length,
            rsu_diameter: c.rsu_diameter,
            average_delay: delay.seconds,
            complete: delay.complete,
            completion_slot: trace.completion_slot,
            completion_fraction: trace.completion_fraction(),
            total_switches: trace.total_switches(),
            wall_secs: started.elapsed().as_secs_f64(),
        })
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Pool(e.to_string()))?;
    let rows = pool.install(|| jobs.par_iter().map(run_job).collect::<Result<Vec<_>, _>>())?;

    for point in &points {
        let name = point.dir_name();
        let dir = if name.is_empty() { args.out.clone() } else { args.out.join(&name) };
        write_atomic(&dir.join("config.txt"), &point.config.to_text())?;
    }
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for row in &rows {
        summary.push_str(&row.to_csv());
        summary.push('\n');
    }
    write_atomic(&args.out.join("summary.csv"), &summary)?;
    Ok(rows)
}

/// Parses the command line, runs, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(rows) => {
            println!("{} run(s) written to {}", rows.len(), args.out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
