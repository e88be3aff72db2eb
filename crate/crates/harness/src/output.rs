//! CSV formats.
//!
//! Per-experiment files `<ID>.csv` have the columns
//! `experiment_id,trial,lhs,stderr,rhs,satisfied,vacuous`; `summary.csv` has
//! `experiment_id,trials,mean,stderr,ci_low,ci_high,mean_rhs,violations,vacuous`.
//! Floats use Rust's shortest round-trip formatting, lines end in LF.

use std::fs;
use std::path::Path;

use sha2::Digest;

use crate::config::ExperimentId;
use crate::error::{HarnessError, Result};
use crate::runner::TrialRecord;
use crate::stats::{bootstrap, BOOTSTRAP_RESAMPLES};

pub const TRIAL_COLUMNS: [&str; 7] = [
    "experiment_id",
    "trial",
    "lhs",
    "stderr",
    "rhs",
    "satisfied",
    "vacuous",
];
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "experiment_id",
    "trials",
    "mean",
    "stderr",
    "ci_low",
    "ci_high",
    "mean_rhs",
    "violations",
    "vacuous",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub trials: usize,
    /// Mean of the per-trial `lhs`.
    pub mean: f64,
    /// Bootstrap standard error of that mean.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_rhs: f64,
    pub violations: usize,
    pub vacuous: usize,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub fn write_trials(path: &Path, id: ExperimentId, trials: &[TrialRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRIAL_COLUMNS)?;
    for t in trials {
        w.write_record([
            id.to_string(),
            t.trial.to_string(),
            num(t.lhs),
            num(t.stderr),
            num(t.rhs),
            t.satisfied.to_string(),
            t.vacuous.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Bootstrap seed of an experiment's summary, so `run` and `report` agree.
pub fn summary_seed(id: &str) -> u64 {
    u64::from_le_bytes(
        sha2::Sha256::digest(id.as_bytes())[..8]
            .try_into()
            .expect("digest has 32 bytes"),
    )
}

/// Summary of one experiment's trials with a seeded bootstrap.
pub fn summary_row(id: &str, trials: &[TrialRecord], seed: u64) -> SummaryRow {
    let lhs: Vec<f64> = trials.iter().map(|t| t.lhs).collect();
    let b = bootstrap(&lhs, BOOTSTRAP_RESAMPLES, seed);
    SummaryRow {
        experiment_id: id.to_string(),
        trials: trials.len(),
        mean: b.mean,
        stderr: b.stderr,
        ci_low: b.ci_low,
        ci_high: b.ci_high,
        mean_rhs: trials.iter().map(|t| t.rhs).sum::<f64>() / trials.len().max(1) as f64,
        violations: trials.iter().filter(|t| t.is_violation()).count(),
        vacuous: trials.iter().filter(|t| t.vacuous).count(),
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.experiment_id.clone(),
            r.trials.to_string(),
            num(r.mean),
            num(r.stderr),
            num(r.ci_low),
            num(r.ci_high),
            num(r.mean_rhs),
            r.violations.to_string(),
            r.vacuous.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn parse_bool(s: &str, path: &Path) -> Result<bool> {
    s.parse()
        .map_err(|_| HarnessError::Spec(format!("{}: `{s}` is not a boolean", path.display())))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.parse()
        .map_err(|_| HarnessError::Spec(format!("{}: `{s}` is not a number", path.display())))
}

/// Reads every per-experiment CSV in `dir`, in file-name order. Files with a
/// different header (summary, series) are skipped.
pub fn read_results(dir: &Path) -> Result<Vec<(String, Vec<TrialRecord>)>> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(HarnessError::MissingResults(dir.into()))
        }
        Err(e) => return Err(HarnessError::io(dir, e)),
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let mut r = csv::Reader::from_path(&path)?;
        if r.headers()?.iter().ne(TRIAL_COLUMNS) {
            continue;
        }
        let mut id = None;
        let mut trials = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            id.get_or_insert_with(|| rec[0].to_string());
            trials.push(TrialRecord {
                trial: rec[1].parse().map_err(|_| {
                    HarnessError::Spec(format!("{}: bad trial index", path.display()))
                })?,
                lhs: parse_f64(&rec[2], &path)?,
                stderr: parse_f64(&rec[3], &path)?,
                rhs: parse_f64(&rec[4], &path)?,
                satisfied: parse_bool(&rec[5], &path)?,
                vacuous: parse_bool(&rec[6], &path)?,
                diagnostics: vec![],
            });
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((id.unwrap_or(stem), trials));
    }
    if out.is_empty() {
        return Err(HarnessError::MissingResults(dir.into()));
    }
    Ok(out)
}

/// Summary rows for the results stored in `dir`; also written to
/// `dir/summary.csv`.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let rows: Vec<SummaryRow> = read_results(dir)?
        .iter()
        .map(|(id, trials)| summary_row(id, trials, summary_seed(id)))
        .collect();
    write_summary(&dir.join("summary.csv"), &rows)?;
    Ok(rows)
}
