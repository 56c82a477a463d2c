//! Scoring of the estimators against the simulated truth, single runs,
//! parameter sweeps and their CSV output.

mod experiment;
mod output;
mod stats;
mod sweep;

use thiserror::Error;

use crate::estimation::EstimationError;
use crate::microsim::SimError;
use crate::scenario::ScenarioError;

pub use experiment::{
    analyze, crossing_events, eval_ticks, run_estimators, run_experiment, Analysis, EstimatorKind, EstimatorScore,
    ExperimentResult,
};
pub use output::{
    num, write_detectors, write_estimates, write_fcd, write_run_outputs, write_summary, write_sweep_rows, write_truth,
    DETECTOR_HEADER, ESTIMATE_HEADER, FCD_HEADER, SUMMARY_HEADER, SWEEP_HEADER, TRUTH_HEADER,
};
pub use stats::{error_stats, front_error, mean_std, FrontErrorSeries, FrontErrorStats};
pub use sweep::{summarize, sweep, RowOutcome, SweepRow, SweepSummary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no usable estimate in the evaluation window ({excluded} degraded ticks)")]
    EmptyWindow { excluded: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("{0}")]
    InvalidSweep(String),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}
