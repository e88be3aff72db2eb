//! Seeded Monte Carlo experiments that score the bound catalog of
//! [`purestat`] against simulated ensembles and trajectories.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod stats;

pub use config::{ExperimentId, ExperimentSpec, RunConfig};
pub use error::{HarnessError, Result};
pub use output::{read_results, summarize, SummaryRow};
pub use runner::{
    run_all, run_einselection_demo, run_experiment, run_experiment_with, worker_count,
    ExperimentResult, RunOutcome, TrialRecord,
};
pub use stats::{bootstrap, Bootstrap};
