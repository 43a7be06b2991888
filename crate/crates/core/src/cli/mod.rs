//! Batch runner: reads an experiment config, executes its grid of cells and
//! writes a TOML report plus a CSV table of curves.

pub mod config;
mod experiments;
pub mod report;

pub use config::{generator_info, ExperimentConfig, GeneratorInfo, GENERATORS};
pub use experiments::DECAY_SLACK;
pub use report::{CellReport, Check, CurvePoint, Report, Value, CURVE_HEADER};

use crate::error::Error;
use experiments::Tolerances;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CUNTZLAB_OUT";
pub const DEFAULT_OUT: &str = "cuntzlab-out";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed = 0,
    InvariantFailure = 1,
    Schema = 2,
    Budget = 3,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Passed => "passed",
            Status::InvariantFailure => "failed",
            Status::Schema => "schema-error",
            Status::Budget => "budget-overflow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: None, out: None, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub report: Report,
    pub curves: Vec<CurvePoint>,
    pub status: Status,
}

impl Execution {
    /// One line per failing cell.
    pub fn failures(&self) -> Vec<String> {
        self.report
            .cells
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match &c.error {
                Some(e) => format!("{}: {e}", c.id),
                None => {
                    let failed: Vec<String> = c
                        .checks
                        .iter()
                        .filter(|k| !k.passed)
                        .map(|k| format!("{} = {:e} (want {} {:e})", k.name, k.value, k.relation, k.limit))
                        .collect();
                    format!("{}: {}", c.id, failed.join("; "))
                }
            })
            .collect()
    }
}

/// Runs every cell of a parsed config; `text` is echoed verbatim.
pub fn execute(cfg: &ExperimentConfig, text: &str, opts: &RunOptions) -> Execution {
    faer::set_global_parallelism(faer::Par::Seq);
    let t = Tolerances { tol: cfg.tolerance * opts.tolerance_scale, scale: opts.tolerance_scale, budget: cfg.budget };
    let cells = experiments::plan(cfg, t);
    let run = || {
        cells
            .par_iter()
            .enumerate()
            .map(|(idx, cell)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(idx as u64);
                let start = Instant::now();
                let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (cell.job)(&mut rng)));
                let seconds = start.elapsed().as_secs_f64();
                let out = match out {
                    Ok(r) => r.map_err(|e| (matches!(e, Error::Budget { .. }), e.to_string())),
                    Err(p) => {
                        let msg = p
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        Err((false, format!("internal error: {msg}")))
                    }
                };
                (cell.id.clone(), seconds, out)
            })
            .collect::<Vec<_>>()
    };
    let results = match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build().map(|p| p.install(run)).unwrap_or_else(|_| run()),
        None => run(),
    };
    let mut reports = Vec::with_capacity(results.len());
    let mut curves = Vec::new();
    let mut budget = false;
    let mut failed = false;
    let mut results = results;
    results.sort_by(|a, b| a.0.cmp(&b.0));
    for (id, seconds, out) in results {
        match out {
            Ok(o) => {
                let passed = o.checks.iter().all(|c| c.passed);
                failed |= !passed;
                curves.extend(o.curve.iter().map(|&(k, value)| CurvePoint { cell: id.clone(), k, value }));
                reports.push(CellReport { id, passed, seconds, error: None, values: o.values, checks: o.checks });
            }
            Err((is_budget, msg)) => {
                budget |= is_budget;
                failed = true;
                reports.push(CellReport { id, passed: false, seconds, error: Some(msg), values: Default::default(), checks: Vec::new() });
            }
        }
    }
    let status = if budget {
        Status::Budget
    } else if failed {
        Status::InvariantFailure
    } else {
        Status::Passed
    };
    let report = Report {
        tool: "cuntzlab".into(),
        version: VERSION.into(),
        seed: cfg.seed,
        experiment: cfg.experiment.kind().into(),
        tolerance_scale: opts.tolerance_scale,
        status: status.as_str().into(),
        config: text.into(),
        cells: reports,
    };
    Execution { report, curves, status }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub execution: Option<Execution>,
    pub report_path: Option<PathBuf>,
    pub curves_path: Option<PathBuf>,
    /// Diagnostics for the user.
    pub messages: Vec<String>,
}

impl RunOutcome {
    fn schema(msg: String) -> Self {
        RunOutcome { status: Status::Schema, execution: None, report_path: None, curves_path: None, messages: vec![msg] }
    }
}

fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Reads, validates and runs a config file, then writes the report and curves.
pub fn run_file(path: &Path, opts: &RunOptions) -> RunOutcome {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return RunOutcome::schema(format!("cannot read {}: {e}", path.display())),
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return RunOutcome::schema(format!("invalid config {}: {e}", path.display())),
    };
    if !(opts.tolerance_scale > 0.0 && opts.tolerance_scale.is_finite()) {
        return RunOutcome::schema(format!("tolerance scale must be positive, got {}", opts.tolerance_scale));
    }
    let stem = cfg
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "experiment".into()));
    let exec = execute(&cfg, &text, opts);
    let dir = output_dir(&cfg, opts);
    let report_path = dir.join(cfg.output.report.clone().unwrap_or_else(|| format!("{stem}.report.toml")));
    let curves_path = dir.join(cfg.output.curves.clone().unwrap_or_else(|| format!("{stem}.curves.csv")));
    let mut messages = exec.failures();
    let written = std::fs::create_dir_all(&dir)
        .and_then(|_| std::fs::write(&report_path, exec.report.to_toml()))
        .and_then(|_| {
            let f = std::fs::File::create(&curves_path)?;
            report::write_curves(std::io::BufWriter::new(f), cfg.experiment.kind(), &exec.curves).map_err(std::io::Error::other)
        });
    let mut status = exec.status;
    if let Err(e) = written {
        messages.push(format!("cannot write output to {}: {e}", dir.display()));
        status = Status::Schema;
    }
    RunOutcome { status, execution: Some(exec), report_path: Some(report_path), curves_path: Some(curves_path), messages }
}

/// The generator catalog as printable lines.
pub fn list_generators() -> Vec<String> {
    GENERATORS.iter().map(|g| format!("{}\tparams: {}\t{}", g.name, g.params, g.note)).collect()
}
