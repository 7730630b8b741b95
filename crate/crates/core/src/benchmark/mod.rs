//! The Monte Carlo benchmark harness: estimator registry, strictly parsed
//! configuration files, deterministic seeded runners, and CSV reports.

mod config;
mod report;
mod runner;

pub use config::{
    Estimator, EstimatorKind, JackknifeSection, SimulationConfig, SplitEvalConfig,
};
pub use report::emit_results;
pub use runner::{
    aggregate, quantile_linear, run_simulation, run_split_eval, BenchmarkResult, Record,
    SummaryRow, FAILURE_EXIT_THRESHOLD,
};
