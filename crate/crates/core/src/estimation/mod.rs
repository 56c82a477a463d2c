//! Online jam-front estimators: weighted regression over probe crossing
//! events, and shock-front integration on a triangular fundamental diagram.

mod crossing;
mod fd;
mod regression;
mod shock;

use thiserror::Error;

pub use crossing::{detect_front_crossings, FrontCrossingEvent, FrontDirection};
pub use fd::{fd_rho_cong, fd_rho_free, shock_speed, FdParams, DENSITY_EPSILON};
pub use regression::{exp_weight, extrapolate_front, fit_front, LinearFit, RegressionEstimator};
pub use shock::{
    apply_probe_reset, delayed_flows, integrate_front, DetectorFlows, ResetOutcome, ShockFrontEstimator,
    ShockFrontState,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("flow {q} veh/h outside [0, {q_max}]")]
    FlowOutOfRange { q: f64, q_max: f64 },
    #[error("degenerate shock between {q1} and {q2} veh/h: densities coincide")]
    DegenerateShock { q1: f64, q2: f64 },
    #[error("negative age {0} s")]
    NegativeAge(f64),
    #[error("cannot integrate backwards from {from} s to {to} s")]
    BackwardIntegration { from: f64, to: f64 },
}

/// One estimator output at one clock tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEstimate {
    pub t: f64,
    pub x_up: Option<f64>,
    pub x_down: Option<f64>,
    /// Usable events (regression) or applied resets (model).
    pub n_points_or_resets: usize,
    pub degraded: bool,
}
