//! Floating-car sampling and delivery to the roadside unit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::microsim::{SimulationOutput, VehicleLog, World};

/// How a probe's records reach the roadside unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommMode {
    /// Cellular forwarding: usable as soon as recorded.
    Instantaneous,
    /// Short-range broadcast: stored on board until the probe passes an RSU.
    LocalAtRsu,
}

impl CommMode {
    pub const ALL: [CommMode; 2] = [CommMode::Instantaneous, CommMode::LocalAtRsu];

    /// Keyword used in scenario files.
    pub fn key(self) -> &'static str {
        match self {
            CommMode::Instantaneous => "instantaneous",
            CommMode::LocalAtRsu => "local_at_rsu",
        }
    }

    /// Short label used in tables (`gsm` / `wlan`).
    pub fn label(self) -> &'static str {
        match self {
            CommMode::Instantaneous => "gsm",
            CommMode::LocalAtRsu => "wlan",
        }
    }
}

impl fmt::Display for CommMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CommMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "instantaneous" | "gsm" => Ok(CommMode::Instantaneous),
            "local_at_rsu" | "local" | "wlan" => Ok(CommMode::LocalAtRsu),
            other => Err(format!("unknown communication mode `{other}` (expected gsm or wlan)")),
        }
    }
}

/// Probe decision for a uniform draw in `[0, 1)`.
#[inline]
pub fn is_selected(draw: f64, probe_fraction: f64) -> bool {
    draw < probe_fraction
}

/// Bernoulli(probe_fraction) selection from the run's probe stream.
pub fn select_probe<R: Rng + ?Sized>(probe_fraction: f64, rng: &mut R) -> bool {
    is_selected(rng.gen::<f64>(), probe_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub probe_id: u64,
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

/// One sample per probe currently on the road.
pub fn record_probes(world: &World, t: f64) -> Vec<RawRecord> {
    let mut out: Vec<RawRecord> =
        world.vehicles().filter(|v| v.is_probe).map(|v| RawRecord { probe_id: v.id, t, x: v.x, v: v.v }).collect();
    out.sort_by_key(|r| r.probe_id);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcdRecord {
    pub probe_id: u64,
    pub t_record: f64,
    pub x: f64,
    pub v: f64,
    /// First time the RSU may use the record; `f64::INFINITY` if never.
    pub t_available: f64,
}

impl FcdRecord {
    pub fn delay(&self) -> f64 {
        self.t_available - self.t_record
    }
}

/// Times at which a piecewise-linear trajectory `(t, x)` passes any of the
/// given positions, ascending.
pub fn rsu_passage_times(trajectory: &[(f64, f64)], rsu_positions: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in trajectory.windows(2) {
        let ((t0, x0), (t1, x1)) = (w[0], w[1]);
        for &r in rsu_positions {
            if x0 < r && x1 >= r {
                out.push(t0 + (t1 - t0) * (r - x0) / (x1 - x0));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Stamps availability times onto one probe's records. `rsu_passages` are
/// the probe's passage times of any RSU, ascending.
pub fn stamp_availability(records: &[RawRecord], mode: CommMode, rsu_passages: &[f64]) -> Vec<FcdRecord> {
    records
        .iter()
        .map(|r| {
            let t_available = match mode {
                CommMode::Instantaneous => r.t,
                CommMode::LocalAtRsu => {
                    let k = rsu_passages.partition_point(|&p| p <= r.t);
                    rsu_passages.get(k).copied().unwrap_or(f64::INFINITY)
                }
            };
            FcdRecord { probe_id: r.probe_id, t_record: r.t, x: r.x, v: r.v, t_available }
        })
        .collect()
}

/// Probe records ordered by availability at the RSU.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FcdFeed {
    records: Vec<FcdRecord>,
}

impl FcdFeed {
    pub fn new(mut records: Vec<FcdRecord>) -> Self {
        records.sort_by(|a, b| {
            a.t_available
                .total_cmp(&b.t_available)
                .then(a.t_record.total_cmp(&b.t_record))
                .then(a.probe_id.cmp(&b.probe_id))
        });
        FcdFeed { records }
    }

    pub fn records(&self) -> &[FcdRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records usable at time `t`. Never-delivered records are
    /// not usable even at `t = +inf`.
    pub fn count_available(&self, t: f64) -> usize {
        self.records.partition_point(|r| r.t_available.is_finite() && r.t_available <= t)
    }

    /// Keeps only what the RSU holds at `t`.
    pub fn truncated(&self, t: f64) -> FcdFeed {
        FcdFeed { records: self.records[..self.count_available(t)].to_vec() }
    }

    /// Maximum finite delivery delay.
    pub fn max_delay(&self) -> Option<f64> {
        self.records.iter().map(FcdRecord::delay).filter(|d| d.is_finite()).max_by(f64::total_cmp)
    }
}

/// Records with `t_available <= t`, in `(t_record, probe_id)` order.
pub fn available_before(feed: &FcdFeed, t: f64) -> Vec<FcdRecord> {
    let mut out = feed.records[..feed.count_available(t)].to_vec();
    out.sort_by(|a, b| a.t_record.total_cmp(&b.t_record).then(a.probe_id.cmp(&b.probe_id)));
    out
}

/// Raw records of one logged vehicle.
pub fn raw_records(log: &VehicleLog) -> Vec<RawRecord> {
    log.records.iter().map(|p| RawRecord { probe_id: log.id, t: p.t, x: p.x, v: p.v }).collect()
}

/// Vehicles of a finished run that are probes at `fraction`.
pub fn probes_at(output: &SimulationOutput, fraction: f64) -> impl Iterator<Item = &VehicleLog> {
    assert!(
        fraction <= output.record_cap,
        "fraction {fraction} exceeds the recorded cap {}",
        output.record_cap
    );
    output.vehicles.iter().filter(move |v| is_selected(v.probe_draw, fraction))
}

/// Per-probe stamped records (each list in record order) for a finished run.
pub fn probe_records(output: &SimulationOutput, fraction: f64, mode: CommMode) -> Vec<Vec<FcdRecord>> {
    probes_at(output, fraction).map(|log| stamp_availability(&raw_records(log), mode, &log.rsu_passages)).collect()
}
