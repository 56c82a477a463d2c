use super::EstimationError;
use crate::units::SECONDS_PER_HOUR;

/// Smallest density difference accepted as a shock denominator (veh/km).
pub const DENSITY_EPSILON: f64 = 1e-6;

/// Triangular fundamental diagram, per lane: a free branch `Q = V0·ρ` and a
/// congested branch `Q = (1 − ρ/ρ_max)/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdParams {
    /// Free speed (km/h).
    pub v0: f64,
    /// Time gap of the congested branch (s).
    pub time_gap: f64,
    /// Jam density (veh/km).
    pub rho_max: f64,
}

impl FdParams {
    /// Parameters fitted to the empirical freeway data.
    pub const CALIBRATED: FdParams = FdParams { v0: 120.0, time_gap: 1.8, rho_max: 80.0 };

    /// Generic parameters used with simulated data.
    pub const UNCALIBRATED: FdParams = FdParams { v0: 100.0, time_gap: 2.0, rho_max: 100.0 };

    pub fn new(v0: f64, time_gap: f64, rho_max: f64) -> Self {
        FdParams { v0, time_gap, rho_max }
    }

    /// Alternative parameterization by the congested wave speed `v_g` (km/h,
    /// negative); the time gap follows from `v_g = −1/(T·ρ_max)`.
    pub fn from_wave_speed(v0: f64, wave_speed: f64, rho_max: f64) -> Self {
        FdParams { v0, time_gap: -SECONDS_PER_HOUR / (wave_speed * rho_max), rho_max }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("v0", self.v0), ("time_gap", self.time_gap), ("rho_max", self.rho_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("estimator.fd.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Congested wave speed v_g (km/h).
    pub fn wave_speed(&self) -> f64 {
        -SECONDS_PER_HOUR / (self.time_gap * self.rho_max)
    }

    /// Density at capacity (veh/km).
    pub fn critical_density(&self) -> f64 {
        self.rho_max / (1.0 + self.v0 * self.time_gap * self.rho_max / SECONDS_PER_HOUR)
    }

    /// Capacity (veh/h per lane).
    pub fn capacity(&self) -> f64 {
        self.v0 * self.critical_density()
    }

    /// Free-branch density, extended linearly past capacity.
    #[inline]
    pub fn free_density(&self, q: f64) -> f64 {
        q / self.v0
    }

    /// Congested-branch density, extended linearly past capacity.
    #[inline]
    pub fn congested_density(&self, q: f64) -> f64 {
        self.rho_max * (1.0 - q * self.time_gap / SECONDS_PER_HOUR)
    }

    fn check_flow(&self, q: f64) -> Result<(), EstimationError> {
        let q_max = self.capacity();
        // capacity itself must be admissible despite rounding in q_max
        if q.is_nan() || q < 0.0 || q > q_max * (1.0 + 1e-12) {
            return Err(EstimationError::FlowOutOfRange { q, q_max });
        }
        Ok(())
    }
}

/// Free-traffic density carrying flow `q` (veh/h per lane).
pub fn fd_rho_free(fd: &FdParams, q: f64) -> Result<f64, EstimationError> {
    fd.check_flow(q)?;
    Ok(fd.free_density(q))
}

/// Congested density carrying flow `q` (veh/h per lane).
pub fn fd_rho_cong(fd: &FdParams, q: f64) -> Result<f64, EstimationError> {
    fd.check_flow(q)?;
    Ok(fd.congested_density(q))
}

/// Propagation speed (km/h) of the front between free traffic carrying `q1`
/// upstream and congested traffic carrying `q2` downstream (per lane).
///
/// Both branch inverses are evaluated on their linear extensions, so flows
/// above the diagram's capacity are accepted as long as the denominator
/// stays away from zero. For flows within capacity the result lies in
/// `[v_g, V0]`.
pub fn shock_speed(fd: &FdParams, q1: f64, q2: f64) -> Result<f64, EstimationError> {
    for q in [q1, q2] {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(EstimationError::FlowOutOfRange { q, q_max: fd.capacity() });
        }
    }
    let denominator = fd.congested_density(q2) - fd.free_density(q1);
    if denominator.abs() < DENSITY_EPSILON {
        return Err(EstimationError::DegenerateShock { q1, q2 });
    }
    Ok((q2 - q1) / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FD: FdParams = FdParams { v0: 100.0, time_gap: 2.0, rho_max: 100.0 };

    #[test]
    fn wave_speeds_of_named_sets() {
        assert!((FdParams::CALIBRATED.wave_speed() + 25.0).abs() < 1e-12);
        assert!((FdParams::UNCALIBRATED.wave_speed() + 18.0).abs() < 1e-12);
        let alt = FdParams::from_wave_speed(100.0, -15.0, 100.0);
        assert!((alt.time_gap - 2.4).abs() < 1e-12);
        assert!((alt.wave_speed() + 15.0).abs() < 1e-12);
    }

    #[test]
    fn free_branch() {
        assert_eq!(fd_rho_free(&FD, 0.0).unwrap(), 0.0);
        let wide = FdParams { v0: 100.0, time_gap: 1.0, rho_max: 100.0 };
        assert_eq!(fd_rho_free(&wide, 1800.0).unwrap(), 18.0);
        let rc = fd_rho_free(&FD, FD.capacity()).unwrap();
        assert!((rc - FD.critical_density()).abs() < 1e-12);
    }

    #[test]
    fn congested_branch() {
        assert_eq!(fd_rho_cong(&FD, 0.0).unwrap(), 100.0);
        assert!((fd_rho_cong(&FD, 900.0).unwrap() - 50.0).abs() < 1e-12);
        let rc = fd_rho_cong(&FD, FD.capacity()).unwrap();
        assert!((rc - FD.critical_density()).abs() / rc < 1e-9);
    }

    #[test]
    fn branches_reject_out_of_range() {
        assert!(matches!(fd_rho_free(&FD, -1.0), Err(EstimationError::FlowOutOfRange { .. })));
        assert!(matches!(fd_rho_cong(&FD, FD.capacity() + 1.0), Err(EstimationError::FlowOutOfRange { .. })));
    }

    #[test]
    fn equal_flows_do_not_move_the_front() {
        assert_eq!(shock_speed(&FD, 900.0, 900.0).unwrap(), 0.0);
    }

    #[test]
    fn derived_shock_speeds() {
        let c = shock_speed(&FD, 1800.0, 900.0).unwrap();
        assert!((c + 28.125).abs() < 1e-9);
        let c = shock_speed(&FD, 1800.0, 0.0).unwrap();
        assert!((c + 1800.0 / 82.0).abs() < 1e-9);
    }

    #[test]
    fn apex_states_are_degenerate() {
        let q = FD.capacity();
        assert!(matches!(shock_speed(&FD, q, q), Err(EstimationError::DegenerateShock { .. })));
    }
}
