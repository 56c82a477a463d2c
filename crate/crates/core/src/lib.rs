//! Jam-front estimation from floating-car data on a simulated freeway.
//!
//! A multi-lane car-following simulation produces the traffic; a fraction of
//! vehicles act as probes whose records reach a roadside unit either at once
//! or when they pass it. Two online estimators track the upstream jam front
//! and are scored against fronts extracted from the full simulated state.

pub mod estimation;
pub mod evaluation;
pub mod groundtruth;
pub mod microsim;
pub mod probe;
pub mod scenario;
pub mod units;

pub use estimation::{FdParams, FrontCrossingEvent, FrontDirection, FrontEstimate};
pub use evaluation::{run_experiment, sweep, EstimatorKind, ExperimentResult, FrontErrorStats};
pub use probe::CommMode;
pub use scenario::{load_scenario, ScenarioConfig};
