//! Experiment configuration: the keyed-text scenario file and the upstream
//! boundary series it points to.
//!
//! A scenario file is a flat list of `key = value` lines. `#` starts a
//! comment. Numeric values may carry a unit after a space (`150 km/h`,
//! `0.33 1/min`, `12 km`); without one they are read in the key's base unit.
//! Every key except `boundary_path` is optional.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::estimation::FdParams;
use crate::microsim::{BottleneckSpec, DriverParams, MobilParams};
use crate::probe::CommMode;
use crate::units::{kmh_to_mps, per_minute_to_per_second};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("boundary series line {line}: {msg}")]
    BoundaryParse { line: usize, msg: String },
    #[error("boundary series line {line}: time {t} does not increase (previous {prev})")]
    BoundaryMonotonicity { line: usize, t: f64, prev: f64 },
    #[error("boundary series line {line}: {msg}")]
    BoundaryRange { line: usize, msg: String },
    #[error("boundary series is empty")]
    BoundaryEmpty,
}

/// One row of the upstream boundary series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    /// Start of validity (s).
    pub t: f64,
    /// Inflow summed over all lanes (veh/h).
    pub total_flow: f64,
    pub truck_fraction: f64,
}

/// Upstream inflow and truck share over time, held constant between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    samples: Vec<BoundarySample>,
}

impl FlowSeries {
    pub fn new(samples: Vec<BoundarySample>) -> Result<Self, ScenarioError> {
        if samples.is_empty() {
            return Err(ScenarioError::BoundaryEmpty);
        }
        for (i, s) in samples.iter().enumerate() {
            let line = i + 2;
            if !(s.t.is_finite()) {
                return Err(ScenarioError::BoundaryRange { line, msg: format!("time {} is not finite", s.t) });
            }
            if !(s.total_flow.is_finite() && s.total_flow >= 0.0) {
                return Err(ScenarioError::BoundaryRange { line, msg: format!("flow {} must be >= 0", s.total_flow) });
            }
            if !(0.0..=1.0).contains(&s.truck_fraction) {
                return Err(ScenarioError::BoundaryRange {
                    line,
                    msg: format!("truck fraction {} outside [0, 1]", s.truck_fraction),
                });
            }
            if i > 0 && !(s.t > samples[i - 1].t) {
                return Err(ScenarioError::BoundaryMonotonicity { line, t: s.t, prev: samples[i - 1].t });
            }
        }
        Ok(FlowSeries { samples })
    }

    /// Constant inflow for the whole run.
    pub fn constant(total_flow: f64, truck_fraction: f64) -> Result<Self, ScenarioError> {
        Self::new(vec![BoundarySample { t: 0.0, total_flow, truck_fraction }])
    }

    pub fn samples(&self) -> &[BoundarySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub const BOUNDARY_HEADER: &str = "t_s,flow_vehph,truck_frac";

pub fn parse_boundary_series(text: &str) -> Result<FlowSeries, ScenarioError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == BOUNDARY_HEADER => {}
        Some((_, header)) => {
            return Err(ScenarioError::BoundaryParse {
                line: 1,
                msg: format!("expected header `{BOUNDARY_HEADER}`, found `{}`", header.trim()),
            })
        }
        None => return Err(ScenarioError::BoundaryEmpty),
    }
    let mut samples = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(ScenarioError::BoundaryParse { line, msg: format!("expected 3 fields, found {}", fields.len()) });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| ScenarioError::BoundaryParse { line, msg: format!("`{s}` is not a number") })
        };
        let (t, flow, frac) = (num(fields[0])?, num(fields[1])?, num(fields[2])?);
        if !(t > prev_t) {
            return Err(ScenarioError::BoundaryMonotonicity { line, t, prev: prev_t });
        }
        if !(flow.is_finite() && flow >= 0.0) {
            return Err(ScenarioError::BoundaryRange { line, msg: format!("flow {flow} must be >= 0") });
        }
        if !(0.0..=1.0).contains(&frac) {
            return Err(ScenarioError::BoundaryRange { line, msg: format!("truck fraction {frac} outside [0, 1]") });
        }
        prev_t = t;
        samples.push(BoundarySample { t, total_flow: flow, truck_fraction: frac });
    }
    FlowSeries::new(samples)
}

pub fn load_boundary_series(path: impl AsRef<Path>) -> Result<FlowSeries, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })?;
    parse_boundary_series(&text)
}

/// Zero-order hold: the last sample at or before `t`, or the first sample
/// for times before the series starts. Returns `(total_flow, truck_fraction)`.
pub fn sample_boundary(series: &FlowSeries, t: f64) -> (f64, f64) {
    let k = series.samples.partition_point(|s| s.t <= t);
    let s = series.samples[k.saturating_sub(1)];
    (s.total_flow, s.truck_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorPositions {
    pub x_up: f64,
    pub x_down: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    /// Forgetting rate of the exponential kernel (1/s).
    pub lambda: f64,
    pub min_points: usize,
    pub fd: FdParams,
    /// Probe speed below which a probe is considered inside the jam (m/s).
    pub v_down: f64,
    /// Probe speed above which a jammed probe is considered free again (m/s).
    pub v_up: f64,
    /// How long a probe must stay out of the jam (no record below `v_down`)
    /// before its exit counts (s). Zero accepts the first fast record.
    pub leave_confirm: f64,
    /// Euler step of the shock-front integration (s).
    pub integration_step: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            lambda: per_minute_to_per_second(0.33),
            min_points: 3,
            fd: FdParams::UNCALIBRATED,
            v_down: kmh_to_mps(50.0),
            v_up: kmh_to_mps(60.0),
            leave_confirm: 120.0,
            integration_step: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub road_length: f64,
    pub lane_count: usize,
    pub sim_duration: f64,
    pub time_step: f64,
    pub rng_seed: u64,
    pub bottleneck: BottleneckSpec,
    pub boundary_path: PathBuf,
    pub probe_fraction: f64,
    pub record_period: f64,
    pub comm_mode: CommMode,
    pub rsu_positions: Vec<f64>,
    pub detector_positions: DetectorPositions,
    pub detector_aggregation: f64,
    /// Ground-truth congestion threshold (m/s).
    pub speed_threshold: f64,
    pub estimator_params: EstimatorParams,
    pub car: DriverParams,
    pub truck: DriverParams,
    pub mobil: MobilParams,
    pub trucks_avoid_left_lane: bool,
    /// Ground-truth speed-field cell size (m).
    pub cell_size: f64,
    /// Ground-truth speed-field bin size (s).
    pub bin_size: f64,
    /// Spacing of the online estimator/evaluation clock (s).
    pub eval_tick: f64,
}

impl ScenarioConfig {
    /// Reference defaults with the given boundary series.
    pub fn with_boundary(boundary_path: impl Into<PathBuf>) -> Self {
        ScenarioConfig {
            road_length: 15_000.0,
            lane_count: 3,
            sim_duration: 12_600.0,
            time_step: 0.25,
            rng_seed: 1,
            bottleneck: BottleneckSpec {
                center: 12_000.0,
                ramp_length: 600.0,
                t_on: 2_400.0,
                t_off: 8_400.0,
                gap_multiplier: 1.4,
            },
            boundary_path: boundary_path.into(),
            probe_fraction: 0.01,
            record_period: 5.0,
            comm_mode: CommMode::Instantaneous,
            rsu_positions: vec![13_000.0],
            detector_positions: DetectorPositions { x_up: 2_000.0, x_down: 12_950.0 },
            detector_aggregation: 60.0,
            speed_threshold: kmh_to_mps(50.0),
            estimator_params: EstimatorParams::default(),
            car: DriverParams::CAR,
            truck: DriverParams::TRUCK,
            mobil: MobilParams::default(),
            trucks_avoid_left_lane: true,
            cell_size: 100.0,
            bin_size: 30.0,
            eval_tick: 30.0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.check().map_err(ScenarioError::Validation)
    }

    fn check(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("road_length", self.road_length)?;
        positive("sim_duration", self.sim_duration)?;
        positive("record_period", self.record_period)?;
        positive("detector.aggregation", self.detector_aggregation)?;
        positive("speed_threshold", self.speed_threshold)?;
        positive("groundtruth.cell_size", self.cell_size)?;
        positive("groundtruth.bin_size", self.bin_size)?;
        positive("evaluation.tick", self.eval_tick)?;
        positive("estimator.integration_step", self.estimator_params.integration_step)?;
        if !(self.time_step > 0.0 && self.time_step <= 0.5) {
            return Err(format!("time_step must be in (0, 0.5] s, got {}", self.time_step));
        }
        if !is_multiple(self.record_period, self.time_step) {
            return Err(format!(
                "record_period ({}) must be an integer multiple of time_step ({})",
                self.record_period, self.time_step
            ));
        }
        if self.lane_count < 1 {
            return Err("lane_count must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.probe_fraction) {
            return Err(format!("probe_fraction must be in [0, 1], got {}", self.probe_fraction));
        }
        self.bottleneck.validate()?;
        let within = |name: &str, x: f64| {
            if (0.0..=self.road_length).contains(&x) {
                Ok(())
            } else {
                Err(format!("{name} = {x} lies outside [0, {}]", self.road_length))
            }
        };
        within("bottleneck.center", self.bottleneck.center)?;
        within("detector.x_up", self.detector_positions.x_up)?;
        within("detector.x_down", self.detector_positions.x_down)?;
        for &x in &self.rsu_positions {
            within("rsu_positions", x)?;
        }
        let DetectorPositions { x_up, x_down } = self.detector_positions;
        if !(x_up < self.bottleneck.center && self.bottleneck.center < x_down) {
            return Err(format!(
                "detectors must straddle the bottleneck: need x_up ({x_up}) < center ({}) < x_down ({x_down})",
                self.bottleneck.center
            ));
        }
        let e = &self.estimator_params;
        if !(e.lambda.is_finite() && e.lambda >= 0.0) {
            return Err(format!("estimator.lambda must be >= 0, got {}", e.lambda));
        }
        if e.min_points < 2 {
            return Err(format!("estimator.min_points must be >= 2, got {}", e.min_points));
        }
        if !(e.v_down > 0.0 && e.v_up > e.v_down) {
            return Err(format!("need 0 < estimator.v_down ({}) < estimator.v_up ({})", e.v_down, e.v_up));
        }
        if !(e.leave_confirm.is_finite() && e.leave_confirm >= 0.0) {
            return Err(format!("estimator.leave_confirm must be >= 0, got {}", e.leave_confirm));
        }
        e.fd.validate()?;
        self.car.validate().map_err(|m| format!("car: {m}"))?;
        self.truck.validate().map_err(|m| format!("truck: {m}"))?;
        self.mobil.validate()?;
        Ok(())
    }

    /// Serializes to the keyed-text format in base units; parsing the result
    /// yields an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("boundary_path", self.boundary_path.display().to_string());
        put("road_length", self.road_length.to_string());
        put("lane_count", self.lane_count.to_string());
        put("sim_duration", self.sim_duration.to_string());
        put("time_step", self.time_step.to_string());
        put("rng_seed", self.rng_seed.to_string());
        put("bottleneck.center", self.bottleneck.center.to_string());
        put("bottleneck.ramp_length", self.bottleneck.ramp_length.to_string());
        put("bottleneck.t_on", self.bottleneck.t_on.to_string());
        put("bottleneck.t_off", self.bottleneck.t_off.to_string());
        put("bottleneck.gap_multiplier", self.bottleneck.gap_multiplier.to_string());
        put("probe_fraction", self.probe_fraction.to_string());
        put("record_period", self.record_period.to_string());
        put("comm_mode", self.comm_mode.key().to_string());
        put("rsu_positions", self.rsu_positions.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        put("detector.x_up", self.detector_positions.x_up.to_string());
        put("detector.x_down", self.detector_positions.x_down.to_string());
        put("detector.aggregation", self.detector_aggregation.to_string());
        put("speed_threshold", self.speed_threshold.to_string());
        let e = &self.estimator_params;
        put("estimator.lambda", e.lambda.to_string());
        put("estimator.min_points", e.min_points.to_string());
        put("estimator.v_down", e.v_down.to_string());
        put("estimator.v_up", e.v_up.to_string());
        put("estimator.leave_confirm", e.leave_confirm.to_string());
        put("estimator.integration_step", e.integration_step.to_string());
        put("estimator.fd.v0", e.fd.v0.to_string());
        put("estimator.fd.time_gap", e.fd.time_gap.to_string());
        put("estimator.fd.rho_max", e.fd.rho_max.to_string());
        for (prefix, p) in [("car", &self.car), ("truck", &self.truck)] {
            put(&format!("{prefix}.v0"), p.v0.to_string());
            put(&format!("{prefix}.time_gap"), p.time_gap.to_string());
            put(&format!("{prefix}.s0"), p.s0.to_string());
            put(&format!("{prefix}.s1"), p.s1.to_string());
            put(&format!("{prefix}.a"), p.a.to_string());
            put(&format!("{prefix}.b"), p.b.to_string());
            put(&format!("{prefix}.length"), p.length.to_string());
        }
        put("mobil.politeness", self.mobil.politeness.to_string());
        put("mobil.threshold", self.mobil.threshold.to_string());
        put("mobil.safe_deceleration", self.mobil.safe_deceleration.to_string());
        put("trucks_avoid_left_lane", self.trucks_avoid_left_lane.to_string());
        put("groundtruth.cell_size", self.cell_size.to_string());
        put("groundtruth.bin_size", self.bin_size.to_string());
        put("evaluation.tick", self.eval_tick.to_string());
        out
    }
}

fn is_multiple(value: f64, step: f64) -> bool {
    let ratio = value / step;
    ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() < 1e-9
}

#[derive(Debug, Clone, Copy)]
enum Unit {
    Length,
    Time,
    Speed,
    /// Speeds whose base unit is km/h (fundamental diagram).
    SpeedKmh,
    Rate,
    Accel,
    Density,
    Fraction,
    Plain,
}

impl Unit {
    fn factor(self, suffix: &str) -> Option<f64> {
        let f = match (self, suffix) {
            (Unit::Length, "m") => 1.0,
            (Unit::Length, "km") => 1000.0,
            (Unit::Time, "s") => 1.0,
            (Unit::Time, "min") => 60.0,
            (Unit::Time, "h") => 3600.0,
            (Unit::Speed, "m/s") => 1.0,
            (Unit::Speed, "km/h") => 1.0 / 3.6,
            (Unit::SpeedKmh, "km/h") => 1.0,
            (Unit::SpeedKmh, "m/s") => 3.6,
            (Unit::Rate, "1/s" | "/s") => 1.0,
            (Unit::Rate, "1/min" | "/min") => 1.0 / 60.0,
            (Unit::Rate, "1/h" | "/h") => 1.0 / 3600.0,
            (Unit::Accel, "m/s^2" | "m/s2" | "m/s²") => 1.0,
            (Unit::Density, "1/km" | "/km" | "veh/km") => 1.0,
            (Unit::Density, "1/m" | "/m" | "veh/m") => 1000.0,
            (Unit::Fraction, "%") => 0.01,
            _ => return None,
        };
        Some(f)
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError::Parse { line, msg: format!("expected `key = value`, found `{content}`") });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ScenarioError::Parse { line, msg: "empty key".into() });
            }
            if map.insert(key.to_string(), (line, value.trim().to_string())).is_some() {
                return Err(ScenarioError::Parse { line, msg: format!("duplicate key `{key}`") });
            }
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn number(&mut self, key: &str, unit: Unit, default: f64) -> Result<f64, ScenarioError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => parse_quantity(&value, unit).map_err(|msg| ScenarioError::Parse {
                line,
                msg: format!("{key}: {msg}"),
            }),
        }
    }

    fn integer<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, ScenarioError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => value
                .parse()
                .map_err(|_| ScenarioError::Parse { line, msg: format!("{key}: `{value}` is not a valid integer") }),
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> Result<bool, ScenarioError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => match value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(ScenarioError::Parse { line, msg: format!("{key}: `{value}` is not a boolean") }),
            },
        }
    }
}

fn parse_quantity(value: &str, unit: Unit) -> Result<f64, String> {
    let mut parts = value.split_whitespace();
    let number = parts.next().ok_or_else(|| "missing value".to_string())?;
    let number: f64 = number.parse().map_err(|_| format!("`{number}` is not a number"))?;
    if !number.is_finite() {
        return Err(format!("`{value}` is not finite"));
    }
    let factor = match parts.next() {
        None => 1.0,
        Some(suffix) => unit.factor(suffix).ok_or_else(|| format!("unsupported unit `{suffix}`"))?,
    };
    if let Some(extra) = parts.next() {
        return Err(format!("unexpected trailing `{extra}`"));
    }
    Ok(number * factor)
}

fn driver_params(entries: &mut Entries, prefix: &str, d: DriverParams) -> Result<DriverParams, ScenarioError> {
    Ok(DriverParams {
        v0: entries.number(&format!("{prefix}.v0"), Unit::Speed, d.v0)?,
        time_gap: entries.number(&format!("{prefix}.time_gap"), Unit::Time, d.time_gap)?,
        s0: entries.number(&format!("{prefix}.s0"), Unit::Length, d.s0)?,
        s1: entries.number(&format!("{prefix}.s1"), Unit::Length, d.s1)?,
        a: entries.number(&format!("{prefix}.a"), Unit::Accel, d.a)?,
        b: entries.number(&format!("{prefix}.b"), Unit::Accel, d.b)?,
        length: entries.number(&format!("{prefix}.length"), Unit::Length, d.length)?,
    })
}

/// Parses scenario text. A relative `boundary_path` is resolved against
/// `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let mut e = Entries::parse(text)?;
    let (_, raw_path) = e
        .take("boundary_path")
        .ok_or_else(|| ScenarioError::Parse { line: 0, msg: "missing required key `boundary_path`".into() })?;
    let raw_path = PathBuf::from(raw_path);
    let boundary_path = if raw_path.is_absolute() { raw_path } else { base_dir.join(raw_path) };
    let d = ScenarioConfig::with_boundary(boundary_path);

    let comm_mode = match e.take("comm_mode") {
        None => d.comm_mode,
        Some((line, v)) => v
            .parse::<CommMode>()
            .map_err(|msg| ScenarioError::Parse { line, msg: format!("comm_mode: {msg}") })?,
    };
    let rsu_positions = match e.take("rsu_positions") {
        None => d.rsu_positions.clone(),
        Some((_, v)) if v.trim().is_empty() => Vec::new(),
        Some((line, v)) => v
            .split(',')
            .map(|item| parse_quantity(item.trim(), Unit::Length))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|msg| ScenarioError::Parse { line, msg: format!("rsu_positions: {msg}") })?,
    };

    let de = d.estimator_params;
    let fd_v0 = e.number("estimator.fd.v0", Unit::SpeedKmh, de.fd.v0)?;
    let fd_rho_max = e.number("estimator.fd.rho_max", Unit::Density, de.fd.rho_max)?;
    let fd = match (e.take("estimator.fd.time_gap"), e.take("estimator.fd.wave_speed")) {
        (Some((line, _)), Some(_)) => {
            return Err(ScenarioError::Parse {
                line,
                msg: "set either estimator.fd.time_gap or estimator.fd.wave_speed, not both".into(),
            })
        }
        (Some((line, v)), None) => {
            let tg = parse_quantity(&v, Unit::Time)
                .map_err(|msg| ScenarioError::Parse { line, msg: format!("estimator.fd.time_gap: {msg}") })?;
            FdParams::new(fd_v0, tg, fd_rho_max)
        }
        (None, Some((line, v))) => {
            let vg = parse_quantity(&v, Unit::SpeedKmh)
                .map_err(|msg| ScenarioError::Parse { line, msg: format!("estimator.fd.wave_speed: {msg}") })?;
            FdParams::from_wave_speed(fd_v0, vg, fd_rho_max)
        }
        (None, None) => FdParams::new(fd_v0, de.fd.time_gap, fd_rho_max),
    };

    let config = ScenarioConfig {
        road_length: e.number("road_length", Unit::Length, d.road_length)?,
        lane_count: e.integer("lane_count", d.lane_count)?,
        sim_duration: e.number("sim_duration", Unit::Time, d.sim_duration)?,
        time_step: e.number("time_step", Unit::Time, d.time_step)?,
        rng_seed: e.integer("rng_seed", d.rng_seed)?,
        bottleneck: BottleneckSpec {
            center: e.number("bottleneck.center", Unit::Length, d.bottleneck.center)?,
            ramp_length: e.number("bottleneck.ramp_length", Unit::Length, d.bottleneck.ramp_length)?,
            t_on: e.number("bottleneck.t_on", Unit::Time, d.bottleneck.t_on)?,
            t_off: e.number("bottleneck.t_off", Unit::Time, d.bottleneck.t_off)?,
            gap_multiplier: e.number("bottleneck.gap_multiplier", Unit::Plain, d.bottleneck.gap_multiplier)?,
        },
        boundary_path: d.boundary_path.clone(),
        probe_fraction: e.number("probe_fraction", Unit::Fraction, d.probe_fraction)?,
        record_period: e.number("record_period", Unit::Time, d.record_period)?,
        comm_mode,
        rsu_positions,
        detector_positions: DetectorPositions {
            x_up: e.number("detector.x_up", Unit::Length, d.detector_positions.x_up)?,
            x_down: e.number("detector.x_down", Unit::Length, d.detector_positions.x_down)?,
        },
        detector_aggregation: e.number("detector.aggregation", Unit::Time, d.detector_aggregation)?,
        speed_threshold: e.number("speed_threshold", Unit::Speed, d.speed_threshold)?,
        estimator_params: EstimatorParams {
            lambda: e.number("estimator.lambda", Unit::Rate, de.lambda)?,
            min_points: e.integer("estimator.min_points", de.min_points)?,
            fd,
            v_down: e.number("estimator.v_down", Unit::Speed, de.v_down)?,
            v_up: e.number("estimator.v_up", Unit::Speed, de.v_up)?,
            leave_confirm: e.number("estimator.leave_confirm", Unit::Time, de.leave_confirm)?,
            integration_step: e.number("estimator.integration_step", Unit::Time, de.integration_step)?,
        },
        car: driver_params(&mut e, "car", d.car)?,
        truck: driver_params(&mut e, "truck", d.truck)?,
        mobil: MobilParams {
            politeness: e.number("mobil.politeness", Unit::Plain, d.mobil.politeness)?,
            threshold: e.number("mobil.threshold", Unit::Accel, d.mobil.threshold)?,
            safe_deceleration: e.number("mobil.safe_deceleration", Unit::Accel, d.mobil.safe_deceleration)?,
        },
        trucks_avoid_left_lane: e.boolean("trucks_avoid_left_lane", d.trucks_avoid_left_lane)?,
        cell_size: e.number("groundtruth.cell_size", Unit::Length, d.cell_size)?,
        bin_size: e.number("groundtruth.bin_size", Unit::Time, d.bin_size)?,
        eval_tick: e.number("evaluation.tick", Unit::Time, d.eval_tick)?,
    };
    if let Some((key, (line, _))) = e.map.into_iter().next() {
        return Err(ScenarioError::Parse { line, msg: format!("unknown key `{key}`") });
    }
    config.validate()?;
    Ok(config)
}

/// Reads and validates a scenario file. The boundary path is made absolute
/// relative to the scenario file's directory.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let dir = std::path::absolute(dir).map_err(|source| ScenarioError::Io { path: dir.to_owned(), source })?;
    parse_scenario(&text, &dir)
}

/// Writes a config so that [`load_scenario`] reads it back unchanged.
pub fn write_scenario(config: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, config.to_text()).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> PathBuf {
        PathBuf::from("/data")
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let c = parse_scenario("boundary_path = inflow.csv\n", &base()).unwrap();
        assert_eq!(c, ScenarioConfig::with_boundary("/data/inflow.csv"));
        assert_eq!(c.record_period, 5.0);
        assert!((c.speed_threshold - 50.0 / 3.6).abs() < 1e-12);
        assert_eq!(c.car, DriverParams::CAR);
        assert_eq!(c.truck, DriverParams::TRUCK);
    }

    #[test]
    fn probe_fraction_out_of_range_is_rejected() {
        let err = parse_scenario("boundary_path = a.csv\nprobe_fraction = 1.5\n", &base()).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("probe_fraction")), "{err}");
    }

    #[test]
    fn lambda_per_minute_is_converted() {
        let c = parse_scenario("boundary_path = a.csv\nestimator.lambda = 0.33 1/min\n", &base()).unwrap();
        assert!((c.estimator_params.lambda - 0.0055).abs() < 1e-15);
    }

    #[test]
    fn units_are_applied() {
        let text = "boundary_path = a.csv\nroad_length = 15 km\ncar.v0 = 120 km/h\nprobe_fraction = 1.2 %\n\
                    estimator.fd.wave_speed = -15 km/h\nsim_duration = 3.5 h\n";
        let c = parse_scenario(text, &base()).unwrap();
        assert_eq!(c.road_length, 15_000.0);
        assert!((c.car.v0 - 120.0 / 3.6).abs() < 1e-12);
        assert!((c.probe_fraction - 0.012).abs() < 1e-15);
        assert!((c.estimator_params.fd.wave_speed() + 15.0).abs() < 1e-9);
        assert_eq!(c.sim_duration, 12_600.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_scenario("boundary_path = a.csv\n\nroad_length = fast\n", &base()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 3, .. }), "{err}");
        let err = parse_scenario("boundary_path = a.csv\nbogus = 1\n", &base()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err}");
        let err = parse_scenario("road_length = 100\n", &base()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }), "{err}");
        let err = parse_scenario("boundary_path = a\nroad_length = 1 furlong\n", &base()).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn invariants_are_checked() {
        let cases = [
            "time_step = 0.6",
            "record_period = 5.1",
            "lane_count = 0",
            "bottleneck.t_off = 100",
            "bottleneck.gap_multiplier = 0.9",
            "detector.x_up = 12500",
            "rsu_positions = 16000",
        ];
        for case in cases {
            let text = format!("boundary_path = a.csv\n{case}\n");
            let err = parse_scenario(&text, &base()).unwrap_err();
            assert!(matches!(err, ScenarioError::Validation(_)), "{case}: {err}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = ScenarioConfig::with_boundary("/x/y.csv");
        c.rsu_positions = vec![12_500.0, 13_000.5];
        c.comm_mode = CommMode::LocalAtRsu;
        c.estimator_params.fd = FdParams::from_wave_speed(100.0, -15.0, 100.0);
        let back = parse_scenario(&c.to_text(), &base()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn boundary_two_rows() {
        let s = parse_boundary_series("t_s,flow_vehph,truck_frac\n0,3000,0.1\n3600,1500,0.2\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.samples()[1], BoundarySample { t: 3600.0, total_flow: 1500.0, truck_fraction: 0.2 });
    }

    #[test]
    fn boundary_rejects_bad_input() {
        let err = parse_boundary_series("t_s,flow_vehph,truck_frac\n60,3000,0.1\n0,1500,0.2\n").unwrap_err();
        assert!(matches!(err, ScenarioError::BoundaryMonotonicity { line: 3, .. }), "{err}");
        let err = parse_boundary_series("t_s,flow_vehph,truck_frac\n0,-1,0.1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::BoundaryRange { .. }), "{err}");
        let err = parse_boundary_series("t_s,flow_vehph,truck_frac\n0,100,1.1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::BoundaryRange { .. }), "{err}");
        let err = parse_boundary_series("time,flow\n0,100\n").unwrap_err();
        assert!(matches!(err, ScenarioError::BoundaryParse { line: 1, .. }), "{err}");
        let err = parse_boundary_series("t_s,flow_vehph,truck_frac\n").unwrap_err();
        assert!(matches!(err, ScenarioError::BoundaryEmpty), "{err}");
    }

    #[test]
    fn zero_order_hold() {
        let single = FlowSeries::constant(3000.0, 0.1).unwrap();
        assert_eq!(sample_boundary(&single, 500.0), (3000.0, 0.1));
        let s = FlowSeries::new(vec![
            BoundarySample { t: 0.0, total_flow: 3000.0, truck_fraction: 0.1 },
            BoundarySample { t: 60.0, total_flow: 1500.0, truck_fraction: 0.2 },
        ])
        .unwrap();
        assert_eq!(sample_boundary(&s, 59.9), (3000.0, 0.1));
        assert_eq!(sample_boundary(&s, 60.0), (1500.0, 0.2));
        assert_eq!(sample_boundary(&s, -10.0), (3000.0, 0.1));
    }
}
