use super::{shock_speed, EstimationError, FdParams, FrontCrossingEvent, FrontDirection, FrontEstimate};
use crate::microsim::DetectorSeries;
use crate::units::kmh_to_mps;

/// Lane-aggregated flow series at the two detectors that bound the
/// estimation span.
#[derive(Debug, Clone, Copy)]
pub struct DetectorFlows<'a> {
    pub up: &'a DetectorSeries,
    pub down: &'a DetectorSeries,
    pub x_up: f64,
    pub x_down: f64,
    pub lane_count: usize,
}

/// Per-lane flows seen by a front at `x_front`: upstream flow advected at the
/// free speed, downstream flow carried back at the congested wave speed.
pub fn delayed_flows(x_front: f64, t: f64, flows: &DetectorFlows<'_>, fd: &FdParams) -> (f64, f64) {
    let lanes = flows.lane_count as f64;
    let t1 = t - (x_front - flows.x_up) / kmh_to_mps(fd.v0);
    let t2 = t - (flows.x_down - x_front) / kmh_to_mps(fd.wave_speed().abs());
    (flows.up.flow_at(t1) / lanes, flows.down.flow_at(t2) / lanes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockFrontState {
    pub x_front: f64,
    pub t: f64,
    pub fd: FdParams,
    /// Applied resets `(t, x)`, oldest first.
    pub reset_log: Vec<(f64, f64)>,
}

impl ShockFrontState {
    pub fn new(x_front: f64, t: f64, fd: FdParams) -> Self {
        ShockFrontState { x_front, t, fd, reset_log: Vec::new() }
    }
}

/// Explicit Euler from `state.t` to `t_target`. With `hold` set, steps
/// whose shock speed is degenerate leave the front in place; the count of
/// such steps is returned.
fn integrate(
    state: &ShockFrontState,
    t_target: f64,
    flows: &DetectorFlows<'_>,
    dt: f64,
    hold: bool,
) -> Result<(ShockFrontState, usize), EstimationError> {
    if t_target < state.t {
        return Err(EstimationError::BackwardIntegration { from: state.t, to: t_target });
    }
    let mut out = state.clone();
    let mut held = 0;
    let t0 = state.t;
    let steps = ((t_target - t0) / dt - 1e-9).ceil().max(0.0) as u64;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let t_next = if k + 1 == steps { t_target } else { t0 + (k + 1) as f64 * dt };
        let (q1, q2) = delayed_flows(out.x_front, t, flows, &out.fd);
        match shock_speed(&out.fd, q1, q2) {
            Ok(c) => {
                let x = out.x_front + kmh_to_mps(c) * (t_next - t);
                out.x_front = x.clamp(flows.x_up, flows.x_down);
            }
            Err(EstimationError::DegenerateShock { .. }) if hold => held += 1,
            Err(e) => return Err(e),
        }
        out.t = t_next;
    }
    Ok((out, held))
}

/// Integrates the front position to `t_target`, clamped to the detector span.
pub fn integrate_front(
    state: &ShockFrontState,
    t_target: f64,
    flows: &DetectorFlows<'_>,
    dt: f64,
) -> Result<ShockFrontState, EstimationError> {
    integrate(state, t_target, flows, dt, false).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetOutcome {
    /// First event: the integration starts here.
    Triggered,
    Reset,
    /// Older than (or identical to) the last applied reset; ignored.
    Stale,
}

fn reset(
    state: Option<&ShockFrontState>,
    fd: &FdParams,
    event: &FrontCrossingEvent,
    t_now: f64,
    flows: &DetectorFlows<'_>,
    dt: f64,
    hold: bool,
) -> Result<(ShockFrontState, ResetOutcome, usize), EstimationError> {
    assert_eq!(event.direction, FrontDirection::EnterJam, "only upstream crossings reset the front");
    assert!(event.t <= t_now && event.t_available <= t_now, "event from the future");
    let outcome = match state.and_then(|s| s.reset_log.last().copied()) {
        Some((t, x)) if event.t < t || (event.t == t && event.x == x) => {
            return Ok((state.unwrap().clone(), ResetOutcome::Stale, 0));
        }
        _ if state.is_none() => ResetOutcome::Triggered,
        _ => ResetOutcome::Reset,
    };
    let mut start = match state {
        Some(s) => s.clone(),
        None => ShockFrontState::new(event.x, event.t, *fd),
    };
    start.x_front = event.x.clamp(flows.x_up, flows.x_down);
    start.t = event.t;
    start.reset_log.push((event.t, event.x));
    let (s, held) = integrate(&start, t_now, flows, dt, hold)?;
    Ok((s, outcome, held))
}

/// Moves the front to a probe's jam-entry point and re-integrates up to
/// `t_now`. With no state yet, the event starts the integration.
pub fn apply_probe_reset(
    state: Option<&ShockFrontState>,
    fd: &FdParams,
    event: &FrontCrossingEvent,
    t_now: f64,
    flows: &DetectorFlows<'_>,
    dt: f64,
) -> Result<(ShockFrontState, ResetOutcome), EstimationError> {
    reset(state, fd, event, t_now, flows, dt, false).map(|(s, o, _)| (s, o))
}

/// Online driver of the model-based estimator. Degenerate steps, where both
/// detector states sit on the capacity point, leave the front in place.
#[derive(Debug, Clone)]
pub struct ShockFrontEstimator<'a> {
    fd: FdParams,
    dt: f64,
    flows: DetectorFlows<'a>,
    state: Option<ShockFrontState>,
    pub degenerate_steps: usize,
    pub stale_events: usize,
}

impl<'a> ShockFrontEstimator<'a> {
    pub fn new(fd: FdParams, dt: f64, flows: DetectorFlows<'a>) -> Self {
        ShockFrontEstimator { fd, dt, flows, state: None, degenerate_steps: 0, stale_events: 0 }
    }

    pub fn state(&self) -> Option<&ShockFrontState> {
        self.state.as_ref()
    }

    /// Feeds one newly usable crossing event; leave-jam events are ignored.
    pub fn offer(&mut self, event: &FrontCrossingEvent, t_now: f64) -> Result<Option<ResetOutcome>, EstimationError> {
        if event.direction != FrontDirection::EnterJam {
            return Ok(None);
        }
        let (s, outcome, held) = reset(self.state.as_ref(), &self.fd, event, t_now, &self.flows, self.dt, true)?;
        if outcome == ResetOutcome::Stale {
            self.stale_events += 1;
        }
        self.degenerate_steps += held;
        self.state = Some(s);
        Ok(Some(outcome))
    }

    pub fn advance(&mut self, t_now: f64) -> Result<(), EstimationError> {
        if let Some(s) = &self.state {
            if t_now > s.t {
                let (s, held) = integrate(s, t_now, &self.flows, self.dt, true)?;
                self.degenerate_steps += held;
                self.state = Some(s);
            }
        }
        Ok(())
    }

    pub fn estimate(&self, t_now: f64) -> FrontEstimate {
        match &self.state {
            Some(s) => FrontEstimate {
                t: t_now,
                x_up: Some(s.x_front),
                x_down: None,
                n_points_or_resets: s.reset_log.len(),
                degraded: false,
            },
            None => FrontEstimate { t: t_now, x_up: None, x_down: None, n_points_or_resets: 0, degraded: true },
        }
    }
}
