use super::{EstimationError, FrontCrossingEvent, FrontDirection, FrontEstimate};

/// Kernel weight `e^(−λ·age)` of an event `age` seconds old.
pub fn exp_weight(lambda: f64, age: f64) -> Result<f64, EstimationError> {
    if age < 0.0 {
        return Err(EstimationError::NegativeAge(age));
    }
    Ok((-lambda * age).exp())
}

/// Front trajectory `x(t) = intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    /// m
    pub intercept: f64,
    /// m/s
    pub slope: f64,
}

pub fn extrapolate_front(fit: &LinearFit, t: f64) -> f64 {
    fit.intercept + fit.slope * t
}

/// Weighted least-squares line through `events`, weighted by age at `t_now`.
/// `None` with fewer than `min_points` events or when all share one time.
///
/// The sums are taken about the weighted mean time, which is algebraically
/// the textbook normal-equation solution but loses less precision when the
/// times are large.
pub fn fit_front(events: &[FrontCrossingEvent], lambda: f64, t_now: f64, min_points: usize) -> Option<LinearFit> {
    if events.len() < min_points.max(2) {
        return None;
    }
    let t0 = events[0].t;
    if events.iter().all(|e| e.t == t0) {
        return None;
    }
    let weights: Vec<f64> =
        events.iter().map(|e| exp_weight(lambda, t_now - e.t).expect("event newer than the estimate time")).collect();
    let s: f64 = weights.iter().sum();
    let t_mean = events.iter().zip(&weights).map(|(e, w)| w * e.t).sum::<f64>() / s;
    let x_mean = events.iter().zip(&weights).map(|(e, w)| w * e.x).sum::<f64>() / s;
    let mut stt = 0.0;
    let mut stx = 0.0;
    for (e, w) in events.iter().zip(&weights) {
        let dt = e.t - t_mean;
        stt += w * dt * dt;
        stx += w * dt * (e.x - x_mean);
    }
    if !(stt > 0.0) {
        // every weight underflowed but one
        return None;
    }
    let slope = stx / stt;
    Some(LinearFit { intercept: x_mean - slope * t_mean, slope })
}

/// Online regression estimator. Events may arrive in any order; they are
/// kept sorted by `(t, probe_id, x)` so that an estimate depends only on the
/// set of events usable at its time.
#[derive(Debug, Clone)]
pub struct RegressionEstimator {
    pub lambda: f64,
    pub min_points: usize,
    up: Vec<FrontCrossingEvent>,
    down: Vec<FrontCrossingEvent>,
}

fn event_order(a: &FrontCrossingEvent, b: &FrontCrossingEvent) -> std::cmp::Ordering {
    a.t.total_cmp(&b.t).then(a.probe_id.cmp(&b.probe_id)).then(a.x.total_cmp(&b.x))
}

impl RegressionEstimator {
    pub fn new(lambda: f64, min_points: usize) -> Self {
        RegressionEstimator { lambda, min_points, up: Vec::new(), down: Vec::new() }
    }

    pub fn push(&mut self, event: FrontCrossingEvent) {
        let list = match event.direction {
            FrontDirection::EnterJam => &mut self.up,
            FrontDirection::LeaveJam => &mut self.down,
        };
        let k = list.partition_point(|e| event_order(e, &event).is_le());
        list.insert(k, event);
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = FrontCrossingEvent>) {
        for e in events {
            self.push(e);
        }
    }

    pub fn upstream_events(&self) -> &[FrontCrossingEvent] {
        &self.up
    }

    fn front(&self, events: &[FrontCrossingEvent], t_now: f64) -> (Option<f64>, usize, bool) {
        let usable: Vec<FrontCrossingEvent> =
            events.iter().copied().filter(|e| e.t_available <= t_now && e.t <= t_now).collect();
        match fit_front(&usable, self.lambda, t_now, self.min_points) {
            Some(fit) => (Some(extrapolate_front(&fit, t_now)), usable.len(), false),
            None => {
                // fall back to the newest crossing
                let latest = usable.iter().max_by(|a, b| event_order(a, b)).map(|e| e.x);
                (latest, usable.len(), true)
            }
        }
    }

    /// Estimate at `t_now`. The degraded flag refers to the upstream front.
    pub fn estimate(&self, t_now: f64) -> FrontEstimate {
        let (x_up, n, degraded) = self.front(&self.up, t_now);
        let (x_down, _, _) = self.front(&self.down, t_now);
        FrontEstimate { t: t_now, x_up, x_down, n_points_or_resets: n, degraded }
    }
}
