use std::fmt;

use super::stats::{error_stats, front_error, FrontErrorStats};
use super::EvalError;
use crate::estimation::{
    detect_front_crossings, DetectorFlows, EstimationError, FrontCrossingEvent, FrontEstimate, RegressionEstimator,
    ShockFrontEstimator,
};
use crate::groundtruth::{extract_fronts, FrontTruth};
use crate::microsim::{simulate, DetectorSeries, SimOptions, SimulationOutput};
use crate::probe::{probe_records, CommMode, FcdFeed, FcdRecord};
use crate::scenario::{EstimatorParams, FlowSeries, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Regression,
    Model,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 2] = [EstimatorKind::Regression, EstimatorKind::Model];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Regression => "regression",
            EstimatorKind::Model => "model",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Score of one estimator in one run. `stats` is `None` when no tick of the
/// evaluation window had a usable estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorScore {
    pub kind: EstimatorKind,
    pub stats: Option<FrontErrorStats>,
    pub excluded: usize,
}

/// Everything derived from one simulation for one probe fraction and
/// communication mode.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub fraction: f64,
    pub mode: CommMode,
    pub feed: FcdFeed,
    /// Crossing events of all probes, ordered by availability.
    pub events: Vec<FrontCrossingEvent>,
    pub regression: Vec<FrontEstimate>,
    pub model: Vec<FrontEstimate>,
    pub scores: [EstimatorScore; 2],
}

impl Analysis {
    pub fn score(&self, kind: EstimatorKind) -> &EstimatorScore {
        &self.scores[kind as usize]
    }

    pub fn estimates(&self, kind: EstimatorKind) -> &[FrontEstimate] {
        match kind {
            EstimatorKind::Regression => &self.regression,
            EstimatorKind::Model => &self.model,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub output: SimulationOutput,
    pub truth: FrontTruth,
    pub detectors: (DetectorSeries, DetectorSeries),
    pub analysis: Analysis,
}

/// Estimator clock: the middle of every `eval_tick` interval of the run.
pub fn eval_ticks(config: &ScenarioConfig) -> Vec<f64> {
    let n = (config.sim_duration / config.eval_tick + 1e-9).floor() as usize;
    (0..n).map(|k| (k as f64 + 0.5) * config.eval_tick).collect()
}

/// Crossing events of every probe, ordered by `(t_available, t, probe_id)`.
pub fn crossing_events(records: &[Vec<FcdRecord>], params: &EstimatorParams) -> Vec<FrontCrossingEvent> {
    let mut events: Vec<FrontCrossingEvent> =
        records.iter().flat_map(|r| detect_front_crossings(r, params.v_down, params.v_up, params.leave_confirm)).collect();
    events.sort_by(|a, b| {
        a.t_available.total_cmp(&b.t_available).then(a.t.total_cmp(&b.t)).then(a.probe_id.cmp(&b.probe_id))
    });
    events
}

/// Replays the events through both estimators on the given clock. At each
/// tick the newly usable events are fed first (oldest first), then the
/// estimates are read.
pub fn run_estimators(
    events: &[FrontCrossingEvent],
    ticks: &[f64],
    params: &EstimatorParams,
    flows: DetectorFlows<'_>,
) -> Result<(Vec<FrontEstimate>, Vec<FrontEstimate>), EstimationError> {
    let mut regression = RegressionEstimator::new(params.lambda, params.min_points);
    let mut model = ShockFrontEstimator::new(params.fd, params.integration_step, flows);
    let mut next = 0;
    let mut reg_out = Vec::with_capacity(ticks.len());
    let mut model_out = Vec::with_capacity(ticks.len());
    for &t in ticks {
        let end = next + events[next..].partition_point(|e| e.t_available <= t);
        let mut batch = events[next..end].to_vec();
        next = end;
        batch.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.probe_id.cmp(&b.probe_id)));
        for e in &batch {
            regression.push(*e);
            model.offer(e, t)?;
        }
        model.advance(t)?;
        reg_out.push(regression.estimate(t));
        model_out.push(model.estimate(t));
    }
    Ok((reg_out, model_out))
}

fn score(kind: EstimatorKind, estimates: &[FrontEstimate], truth: &FrontTruth) -> EstimatorScore {
    match front_error(estimates, truth).and_then(|s| error_stats(&s)) {
        Ok(stats) => EstimatorScore { kind, stats: Some(stats), excluded: stats.excluded },
        Err(EvalError::EmptyWindow { excluded }) => EstimatorScore { kind, stats: None, excluded },
        Err(e) => unreachable!("scoring cannot fail with {e}"),
    }
}

/// Samples probes at `fraction`, stamps availability for `mode` and runs
/// both estimators against the truth.
pub fn analyze(
    config: &ScenarioConfig,
    output: &SimulationOutput,
    truth: &FrontTruth,
    detectors: &(DetectorSeries, DetectorSeries),
    fraction: f64,
    mode: CommMode,
) -> Result<Analysis, EvalError> {
    let records = probe_records(output, fraction, mode);
    let events = crossing_events(&records, &config.estimator_params);
    let flows = DetectorFlows {
        up: &detectors.0,
        down: &detectors.1,
        x_up: config.detector_positions.x_up,
        x_down: config.detector_positions.x_down,
        lane_count: config.lane_count,
    };
    let ticks = eval_ticks(config);
    let (regression, model) = run_estimators(&events, &ticks, &config.estimator_params, flows)?;
    let scores = [
        score(EstimatorKind::Regression, &regression, truth),
        score(EstimatorKind::Model, &model, truth),
    ];
    Ok(Analysis {
        fraction,
        mode,
        feed: FcdFeed::new(records.into_iter().flatten().collect()),
        events,
        regression,
        model,
        scores,
    })
}

/// Simulates the configured scenario once and evaluates it at the
/// configured probe fraction and communication mode.
pub fn run_experiment(config: &ScenarioConfig, series: &FlowSeries) -> Result<ExperimentResult, EvalError> {
    config.validate()?;
    let output = simulate(config, series, SimOptions::for_fraction(config.probe_fraction))?;
    let truth = extract_fronts(&output.speed_field, config.speed_threshold);
    let detectors = output.detector_series(config);
    let analysis = analyze(config, &output, &truth, &detectors, config.probe_fraction, config.comm_mode)?;
    Ok(ExperimentResult { config: config.clone(), output, truth, detectors, analysis })
}
