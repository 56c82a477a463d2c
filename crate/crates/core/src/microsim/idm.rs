use std::fmt;

use super::SimError;

/// Brake limit applied to every IDM acceleration (m/s²).
pub const MAX_DECELERATION: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Truck => "truck",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intelligent Driver Model parameters of one driver-vehicle unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverParams {
    /// Desired speed (m/s).
    pub v0: f64,
    /// Desired time gap (s).
    pub time_gap: f64,
    /// Jam distance (m).
    pub s0: f64,
    /// Nonlinear gap parameter (m).
    pub s1: f64,
    /// Maximum acceleration (m/s²).
    pub a: f64,
    /// Comfortable deceleration (m/s²).
    pub b: f64,
    /// Vehicle length (m).
    pub length: f64,
}

impl DriverParams {
    pub const CAR: DriverParams = DriverParams {
        v0: 150.0 / 3.6,
        time_gap: 1.15,
        s0: 2.5,
        s1: 3.0,
        a: 1.0,
        b: 2.0,
        length: 8.0,
    };

    pub const TRUCK: DriverParams = DriverParams {
        v0: 90.0 / 3.6,
        time_gap: 2.1,
        s0: 4.0,
        s1: 3.0,
        a: 0.8,
        b: 2.0,
        length: 15.0,
    };

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("v0", self.v0),
            ("time_gap", self.time_gap),
            ("s0", self.s0),
            ("s1", self.s1),
            ("a", self.a),
            ("b", self.b),
            ("length", self.length),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(format!("driver parameter {name} must be positive, got {value}"));
            }
        }
        Ok(())
    }

    /// Desired dynamic gap s*(v, dv) with the time gap `time_gap` substituted
    /// (the bottleneck modifies it locally).
    #[inline]
    pub fn desired_gap(&self, time_gap: f64, v: f64, dv: f64) -> f64 {
        let dynamic = time_gap * v + v * dv / (2.0 * (self.a * self.b).sqrt());
        self.s0 + self.s1 * (v / self.v0).sqrt() + dynamic.max(0.0)
    }

    /// Net gap at which a homogeneous platoon at speed `v` is in equilibrium.
    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        let free = 1.0 - (v / self.v0).powi(4);
        assert!(free > 0.0, "no equilibrium at or above the desired speed");
        self.desired_gap(self.time_gap, v, 0.0) / free.sqrt()
    }
}

/// IDM acceleration with an explicitly supplied time gap. `gap` may be
/// `f64::INFINITY` for a free road.
#[inline]
pub(crate) fn idm_accel_with_gap_param(p: &DriverParams, time_gap: f64, v: f64, gap: f64, dv: f64) -> f64 {
    let free = 1.0 - (v / p.v0).powi(4);
    let interaction = if gap.is_finite() {
        let ratio = p.desired_gap(time_gap, v, dv) / gap;
        ratio * ratio
    } else {
        0.0
    };
    (p.a * (free - interaction)).max(-MAX_DECELERATION)
}

/// IDM acceleration for speed `v`, net gap `gap` and approach rate
/// `dv = v - v_leader`. Pass `f64::INFINITY` as gap when there is no leader.
pub fn idm_acceleration(p: &DriverParams, v: f64, gap: f64, dv: f64) -> Result<f64, SimError> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(SimError::NonPositiveGap(gap));
    }
    Ok(idm_accel_with_gap_param(p, p.time_gap, v, gap, dv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_standstill_equilibrium() {
        let p = DriverParams::CAR;
        assert_eq!(idm_acceleration(&p, 0.0, p.s0, 0.0).unwrap(), 0.0);
        let t = DriverParams::TRUCK;
        assert_eq!(idm_acceleration(&t, 0.0, t.s0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_at_desired_speed_on_free_road() {
        let p = DriverParams::CAR;
        assert_eq!(idm_acceleration(&p, p.v0, f64::INFINITY, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_positive_gap() {
        let p = DriverParams::CAR;
        assert!(idm_acceleration(&p, 10.0, 0.0, 0.0).is_err());
        assert!(idm_acceleration(&p, 10.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn brake_limit_applies() {
        let p = DriverParams::CAR;
        let a = idm_acceleration(&p, 30.0, 0.5, 10.0).unwrap();
        assert_eq!(a, -MAX_DECELERATION);
    }

    #[test]
    fn equilibrium_gap_gives_zero_acceleration() {
        let p = DriverParams::CAR;
        for v in [0.0, 5.0, 15.0, 30.0] {
            let s = p.equilibrium_gap(v);
            let a = idm_acceleration(&p, v, s, 0.0).unwrap();
            assert!(a.abs() < 1e-12, "v={v} a={a}");
        }
    }
}
