use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use purestat_harness::{run_all, summarize, worker_count, ExperimentId, RunConfig};

#[derive(Parser)]
#[command(
    name = "purestat",
    version,
    about = "Seeded experiments for pure-state typicality and equilibration bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments selected by a config file.
    Run {
        /// Config file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the file's run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the file's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to $PURESTAT_WORKERS, then the core count.
        #[arg(long)]
        workers: Option<usize>,
        /// Extra `key=value` overrides applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Summarize the per-experiment CSVs in a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the experiment catalog.
    List,
}

fn run(cli: Cli) -> purestat_harness::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            workers,
            set,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            for kv in &set {
                let (k, v) =
                    kv.split_once('=')
                        .ok_or_else(|| purestat_harness::HarnessError::Config {
                            line: 0,
                            message: format!("--set expects KEY=VALUE, got `{kv}`"),
                        })?;
                cfg.set(k.trim(), v.trim())?;
            }
            let workers = workers.filter(|&w| w > 0).unwrap_or_else(worker_count);
            let outcome = run_all(&cfg, workers)?;
            println!(
                "{:<28} {:>6} {:>14} {:>14} {:>5} {:>5} {:>8}",
                "experiment", "trials", "mean lhs", "mean rhs", "viol", "vac", "seconds"
            );
            for r in &outcome.results {
                let s = &r.summary;
                println!(
                    "{:<28} {:>6} {:>14.6e} {:>14.6e} {:>5} {:>5} {:>8.2}",
                    s.experiment_id,
                    s.trials,
                    s.mean,
                    s.mean_rhs,
                    s.violations,
                    s.vacuous,
                    r.wall_time
                );
            }
            println!("manifest: {}", outcome.manifest_path.display());
            Ok(outcome.violations() == 0)
        }
        Command::Report { input } => {
            let rows = summarize(&input)?;
            println!(
                "{:<28} {:>6} {:>14} {:>14} {:>14} {:>5} {:>5}",
                "experiment", "trials", "mean lhs", "ci low", "ci high", "viol", "vac"
            );
            for s in &rows {
                println!(
                    "{:<28} {:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>5} {:>5}",
                    s.experiment_id, s.trials, s.mean, s.ci_low, s.ci_high, s.violations, s.vacuous
                );
            }
            Ok(rows.iter().all(|r| r.violations == 0))
        }
        Command::List => {
            for id in ExperimentId::all() {
                println!("{:<28} {}", id.as_str(), id.description());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
