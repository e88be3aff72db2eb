//! Trial scheduling, persistence and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use purestat::ensembles::trial_rng;
use purestat::BoundReport;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentId, ExperimentSpec, RunConfig};
use crate::error::{HarnessError, Result};
use crate::experiments::{prepare, run_trial, TrialOutput};
use crate::output::{summary_row, summary_seed, write_summary, write_trials, SummaryRow};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "PURESTAT_WORKERS";

/// Trial index of the stream that draws objects shared across trials.
const SHARED_STREAM: u64 = u64::MAX;

/// One row of the per-experiment CSV, plus diagnostics that stay in memory
/// and in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub lhs: f64,
    pub stderr: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub vacuous: bool,
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl TrialRecord {
    pub fn from_report(r: &BoundReport) -> Self {
        Self {
            trial: r.trial,
            lhs: r.lhs,
            stderr: r.stderr,
            rhs: r.rhs,
            satisfied: r.satisfied,
            vacuous: r.vacuous,
            diagnostics: vec![],
        }
    }

    pub fn is_violation(&self) -> bool {
        !self.satisfied && !self.vacuous
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub trials: Vec<TrialRecord>,
    pub summary: SummaryRow,
    pub csv_path: PathBuf,
    pub series_paths: Vec<PathBuf>,
    pub wall_time: f64,
}

impl ExperimentResult {
    pub fn violations(&self) -> usize {
        self.trials.iter().filter(|t| t.is_violation()).count()
    }

    pub fn vacuous(&self) -> usize {
        self.trials.iter().filter(|t| t.vacuous).count()
    }

    /// Values of one diagnostic across trials, in trial order.
    pub fn diagnostic(&self, name: &str) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.diagnostic(name))
            .collect()
    }

    pub fn diagnostic_stats(&self) -> BTreeMap<String, DiagnosticStats> {
        let mut names: Vec<&str> = self
            .trials
            .iter()
            .flat_map(|t| t.diagnostics.iter().map(|(n, _)| *n))
            .collect();
        names.sort_unstable();
        names.dedup();
        names
            .into_iter()
            .map(|n| {
                let v = self.diagnostic(n);
                let stats = DiagnosticStats {
                    min: v.iter().copied().fold(f64::INFINITY, f64::min),
                    max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                };
                (n.to_string(), stats)
            })
            .collect()
    }
}

/// Worker count from `PURESTAT_WORKERS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run_experiment_with(spec, worker_count())
}

/// Pointer-Hamiltonian demo; `spec.id` must be `EINSELECTION_DEMO`.
pub fn run_einselection_demo(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.id != ExperimentId::EinselectionDemo {
        return Err(HarnessError::Spec(format!(
            "{} is not EINSELECTION_DEMO",
            spec.id
        )));
    }
    run_experiment(spec)
}

/// Runs every trial of `spec` on a pool of `workers` threads and writes
/// `<out>/<ID>.csv` (and any series files) before returning. Output does not
/// depend on `workers`.
pub fn run_experiment_with(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let start = Instant::now();
    let seed = spec.stream_seed();
    let shared = prepare(spec, &mut trial_rng(seed, SHARED_STREAM))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let outputs: Vec<TrialOutput> = pool.install(|| {
        (0..spec.trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut out = run_trial(spec, &shared, t, &mut trial_rng(seed, t))?;
                out.record.trial = t;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    fs::create_dir_all(&spec.out_dir).map_err(|e| HarnessError::io(&spec.out_dir, e))?;
    let mut trials = Vec::with_capacity(outputs.len());
    let mut series_paths = Vec::new();
    for out in outputs {
        if let Some(series) = out.series {
            let dir = spec.out_dir.join("series");
            fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
            let path = dir.join(format!("{}.csv", series.name));
            fs::write(&path, series.csv).map_err(|e| HarnessError::io(&path, e))?;
            series_paths.push(path);
        }
        trials.push(out.record);
    }
    let csv_path = spec.out_dir.join(format!("{}.csv", spec.id));
    write_trials(&csv_path, spec.id, &trials)?;
    let summary = summary_row(spec.id.as_str(), &trials, summary_seed(spec.id.as_str()));
    Ok(ExperimentResult {
        spec: spec.clone(),
        trials,
        summary,
        csv_path,
        series_paths,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub results: Vec<ExperimentResult>,
    pub manifest_path: PathBuf,
    pub summary_path: PathBuf,
}

impl RunOutcome {
    pub fn violations(&self) -> usize {
        self.results.iter().map(ExperimentResult::violations).sum()
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    id: String,
    trials: usize,
    csv: String,
    csv_sha256: String,
    violations: usize,
    vacuous: usize,
    wall_time_seconds: f64,
    series: Vec<String>,
    diagnostics: BTreeMap<String, DiagnosticStats>,
}

#[derive(Serialize)]
struct Manifest {
    code_version: &'static str,
    seed: u64,
    workers: usize,
    spec_sha256: String,
    config: String,
    wall_time_seconds: f64,
    experiments: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

/// Runs every selected experiment, then writes `summary.csv` and
/// `manifest.json` into the output directory.
pub fn run_all(config: &RunConfig, workers: usize) -> Result<RunOutcome> {
    let specs = config.specs()?;
    let start = Instant::now();
    let results = specs
        .iter()
        .map(|s| run_experiment_with(s, workers))
        .collect::<Result<Vec<_>>>()?;
    let out = &config.out_dir;
    let summary_path = out.join("summary.csv");
    write_summary(
        &summary_path,
        &results
            .iter()
            .map(|r| r.summary.clone())
            .collect::<Vec<_>>(),
    )?;

    let canonical: String = specs
        .iter()
        .map(|s| format!("[{}]\n{}", s.id, s.canonical()))
        .collect();
    let mut entries = Vec::with_capacity(results.len());
    for r in &results {
        let bytes = fs::read(&r.csv_path).map_err(|e| HarnessError::io(&r.csv_path, e))?;
        entries.push(ManifestEntry {
            id: r.spec.id.to_string(),
            trials: r.trials.len(),
            csv: relative(&r.csv_path, out),
            csv_sha256: sha256_hex(&bytes),
            violations: r.violations(),
            vacuous: r.vacuous(),
            wall_time_seconds: r.wall_time,
            series: r.series_paths.iter().map(|p| relative(p, out)).collect(),
            diagnostics: r.diagnostic_stats(),
        });
    }
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        workers,
        spec_sha256: sha256_hex(canonical.as_bytes()),
        config: canonical,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        experiments: entries,
    };
    let manifest_path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| HarnessError::io(&manifest_path, e))?;
    Ok(RunOutcome {
        results,
        manifest_path,
        summary_path,
    })
}
