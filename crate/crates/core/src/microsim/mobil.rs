use super::idm::{idm_accel_with_gap_param, DriverParams};

/// MOBIL lane-changing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilParams {
    pub politeness: f64,
    /// Switching threshold Δa_th (m/s²).
    pub threshold: f64,
    /// Maximum deceleration imposed on the new follower (m/s²).
    pub safe_deceleration: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        MobilParams { politeness: 0.2, threshold: 0.2, safe_deceleration: 4.0 }
    }
}

impl MobilParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.politeness >= 0.0) {
            return Err(format!("mobil.politeness must be >= 0, got {}", self.politeness));
        }
        if !(self.threshold >= 0.0) {
            return Err(format!("mobil.threshold must be >= 0, got {}", self.threshold));
        }
        if !(self.safe_deceleration > 0.0) {
            return Err(format!("mobil.safe_deceleration must be > 0, got {}", self.safe_deceleration));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChange {
    Stay,
    ChangeLeft,
    ChangeRight,
}

/// A vehicle as seen by the lane-change model: front position, speed,
/// parameters and the time gap in effect at its position.
#[derive(Debug, Clone, Copy)]
pub struct LaneVehicle<'a> {
    pub x: f64,
    pub v: f64,
    pub params: &'a DriverParams,
    pub time_gap: f64,
}

impl<'a> LaneVehicle<'a> {
    /// Acceleration of `self` when following `leader` (free road if none),
    /// or `None` when the two overlap.
    #[inline]
    pub fn accel_behind(&self, leader: Option<&LaneVehicle<'_>>) -> Option<f64> {
        match leader {
            None => Some(idm_accel_with_gap_param(self.params, self.time_gap, self.v, f64::INFINITY, 0.0)),
            Some(l) => {
                let gap = l.x - l.params.length - self.x;
                if gap <= 0.0 {
                    None
                } else {
                    Some(idm_accel_with_gap_param(self.params, self.time_gap, self.v, gap, self.v - l.v))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LaneNeighbors<'a> {
    pub leader: Option<LaneVehicle<'a>>,
    pub follower: Option<LaneVehicle<'a>>,
}

/// Accelerations on the unchanged snapshot that MOBIL compares against.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CurrentAccels {
    /// Subject in its current lane.
    pub subject: f64,
    /// Current-lane follower behind the subject (0 when absent).
    pub old_follower: f64,
}

/// Incentive margin for moving into `target`, or `None` if the move is
/// unsafe or physically impossible. `target_follower_accel` is the target
/// follower's acceleration before the change.
#[inline]
pub(crate) fn change_margin(
    subject: &LaneVehicle<'_>,
    current: &LaneNeighbors<'_>,
    target: &LaneNeighbors<'_>,
    now: CurrentAccels,
    target_follower_accel: f64,
    mp: &MobilParams,
) -> Option<f64> {
    let new_follower_gain = match &target.follower {
        Some(f) => {
            let after = f.accel_behind(Some(subject))?;
            if after < -mp.safe_deceleration {
                return None;
            }
            after - target_follower_accel
        }
        None => 0.0,
    };
    let subject_after = subject.accel_behind(target.leader.as_ref())?;
    let old_follower_gain = match &current.follower {
        Some(f) => f.accel_behind(current.leader.as_ref())? - now.old_follower,
        None => 0.0,
    };
    let margin =
        subject_after - now.subject + mp.politeness * (new_follower_gain + old_follower_gain) - mp.threshold;
    (margin > 0.0).then_some(margin)
}

/// Picks the better admissible lane; ties go left.
#[inline]
pub(crate) fn choose(left: Option<f64>, right: Option<f64>) -> LaneChange {
    match (left, right) {
        (Some(l), Some(r)) if r > l => LaneChange::ChangeRight,
        (Some(_), _) => LaneChange::ChangeLeft,
        (None, Some(_)) => LaneChange::ChangeRight,
        (None, None) => LaneChange::Stay,
    }
}

/// Symmetric MOBIL decision. `left`/`right` are `None` when the lane does not
/// exist or is closed to the subject.
pub fn mobil_decision(
    subject: &LaneVehicle<'_>,
    current: &LaneNeighbors<'_>,
    left: Option<&LaneNeighbors<'_>>,
    right: Option<&LaneNeighbors<'_>>,
    mp: &MobilParams,
) -> LaneChange {
    let Some(subject_now) = subject.accel_behind(current.leader.as_ref()) else {
        return LaneChange::Stay;
    };
    let old_follower = current.follower.as_ref().and_then(|f| f.accel_behind(Some(subject))).unwrap_or(0.0);
    let now = CurrentAccels { subject: subject_now, old_follower };
    let eval = |target: &LaneNeighbors<'_>| {
        let before = match &target.follower {
            Some(f) => f.accel_behind(target.leader.as_ref())?,
            None => 0.0,
        };
        change_margin(subject, current, target, now, before, mp)
    };
    choose(left.and_then(eval), right.and_then(eval))
}
