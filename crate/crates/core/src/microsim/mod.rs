//! Time-stepped multi-lane freeway simulation: IDM car following, MOBIL lane
//! changes, a time-gap bottleneck, boundary injection and virtual detectors.

mod bottleneck;
mod detector;
mod idm;
mod mobil;
mod world;

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use bottleneck::{effective_time_gap, BottleneckSpec};
pub use detector::{detector_measure, DetectorSample, DetectorSeries};
pub use idm::{idm_acceleration, DriverParams, VehicleClass, MAX_DECELERATION};
pub use mobil::{mobil_decision, LaneChange, LaneNeighbors, LaneVehicle, MobilParams};
pub use world::{Crossing, Exit, RoadLayout, StepReport, VehicleState, World};

use crate::groundtruth::{SpeedField, SpeedFieldBuilder};
use crate::probe;
use crate::scenario::{sample_boundary, FlowSeries, ScenarioConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("IDM needs a positive net gap, got {0}")]
    NonPositiveGap(f64),
    #[error("collision at t = {t} s on lane {lane}: vehicle {follower} overlaps leader {leader} by {gap} m")]
    Collision { t: f64, lane: usize, leader: u64, follower: u64, gap: f64 },
    #[error("vehicle {id} would overlap a neighbor on lane {lane}")]
    Overlap { id: u64, lane: usize },
    #[error("lane {0} does not exist")]
    InvalidLane(usize),
    #[error("trajectory output: {0}")]
    Io(#[from] std::io::Error),
}

/// Independent random streams of one run: vehicle classes come from the
/// traffic stream, probe flags from the probe stream, so changing the probe
/// fraction never changes the simulated traffic.
pub struct RunRngs {
    pub traffic: ChaCha8Rng,
    pub probe: ChaCha8Rng,
}

impl RunRngs {
    pub fn from_seed(seed: u64) -> Self {
        let traffic = ChaCha8Rng::seed_from_u64(seed);
        let mut probe = ChaCha8Rng::seed_from_u64(seed);
        probe.set_stream(1);
        RunRngs { traffic, probe }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    class: VehicleClass,
    probe_draw: f64,
}

/// Upstream boundary: turns the inflow series into vehicles at x = 0.
#[derive(Debug, Clone)]
pub struct Injector {
    car: DriverParams,
    truck: DriverParams,
    probe_fraction: f64,
    accumulator: f64,
    pending: Option<Pending>,
    next_id: u64,
}

impl Injector {
    pub fn new(car: DriverParams, truck: DriverParams, probe_fraction: f64) -> Self {
        Injector { car, truck, probe_fraction, accumulator: 0.0, pending: None, next_id: 0 }
    }

    /// Demand accrued but not yet inserted (vehicles).
    pub fn backlog(&self) -> f64 {
        self.accumulator
    }

    /// Accrues `flow · dt` of demand and inserts whole vehicles while a lane
    /// admits one. Returns the vehicles inserted in this call.
    pub fn inject(
        &mut self,
        world: &mut World,
        series: &FlowSeries,
        t: f64,
        dt: f64,
        rngs: &mut RunRngs,
    ) -> Result<Vec<VehicleState>, SimError> {
        let (flow, truck_fraction) = sample_boundary(series, t);
        self.accumulator += flow / crate::units::SECONDS_PER_HOUR * dt;
        let mut inserted = Vec::new();
        while self.accumulator >= 1.0 {
            let pending = *self.pending.get_or_insert_with(|| {
                let class = if rngs.traffic.gen_bool(truck_fraction) { VehicleClass::Truck } else { VehicleClass::Car };
                let probe_draw: f64 = rngs.probe.gen();
                Pending { class, probe_draw }
            });
            let params = match pending.class {
                VehicleClass::Car => self.car,
                VehicleClass::Truck => self.truck,
            };
            let Some((lane, v)) = Self::admitting_lane(world, pending.class, &params) else {
                break;
            };
            let vehicle = VehicleState {
                id: self.next_id,
                class: pending.class,
                params,
                lane,
                x: 0.0,
                v,
                is_probe: probe::is_selected(pending.probe_draw, self.probe_fraction),
                probe_draw: pending.probe_draw,
            };
            world.insert(vehicle.clone())?;
            inserted.push(vehicle);
            self.next_id += 1;
            self.pending = None;
            self.accumulator -= 1.0;
        }
        Ok(inserted)
    }

    /// Lane with the largest headway at the entrance, and the insertion speed,
    /// if that lane has room.
    fn admitting_lane(world: &World, class: VehicleClass, params: &DriverParams) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for lane in 0..world.layout().lane_count {
            if !world.lane_allowed(class, lane) {
                continue;
            }
            let gap = world.last_in_lane(lane).map_or(f64::INFINITY, |l| l.rear());
            if best.map_or(true, |(_, g)| gap > g) {
                best = Some((lane, gap));
            }
        }
        let (lane, gap) = best?;
        let lead_v = world.last_in_lane(lane).map_or(f64::INFINITY, |l| l.v);
        let v = params.v0.min(lead_v);
        (gap >= params.s0 + v * params.time_gap).then_some((lane, v.min(gap / params.time_gap)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

/// Everything the post-processing needs to know about one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleLog {
    pub id: u64,
    pub class: VehicleClass,
    pub t_enter: f64,
    pub t_exit: Option<f64>,
    pub probe_draw: f64,
    /// Samples at every multiple of the record period while on the road;
    /// kept only for vehicles whose draw is below the record cap.
    pub records: Vec<TrajectoryPoint>,
    /// Times at which the vehicle passed any roadside unit, ascending.
    pub rsu_passages: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    pub t: f64,
    pub vehicle_id: u64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub vehicles: Vec<VehicleLog>,
    /// Passages at the upstream (index 0) and downstream (index 1) detector.
    pub detector_passages: [Vec<Passage>; 2],
    pub speed_field: SpeedField,
    pub record_cap: f64,
    pub injected: u64,
    pub exited: u64,
    pub on_road_at_end: usize,
    pub lane_changes: u64,
}

impl SimulationOutput {
    /// Lane-aggregated detector series for the upstream and downstream
    /// detectors.
    pub fn detector_series(&self, config: &ScenarioConfig) -> (DetectorSeries, DetectorSeries) {
        let xs = [config.detector_positions.x_up, config.detector_positions.x_down];
        let mut out = xs.iter().zip(&self.detector_passages).map(|(&x, passages)| {
            let times: Vec<f64> = passages.iter().map(|p| p.t).collect();
            DetectorSeries::aggregate(&times, x, config.detector_aggregation, config.sim_duration)
        });
        (out.next().unwrap(), out.next().unwrap())
    }
}

pub struct SimOptions<'a> {
    /// Vehicles with `probe_draw < record_cap` get their 5-s samples kept.
    pub record_cap: f64,
    /// Optional sink for the full trajectory CSV (every vehicle at every
    /// record instant).
    pub trajectory_out: Option<&'a mut dyn Write>,
}

impl SimOptions<'_> {
    pub fn for_fraction(fraction: f64) -> Self {
        SimOptions { record_cap: fraction, trajectory_out: None }
    }
}

pub const TRAJECTORY_HEADER: &str = "t_s,id,lane,x_m,v_mps,class,is_probe";

pub fn road_layout(config: &ScenarioConfig) -> RoadLayout {
    let mut cross_sections = vec![config.detector_positions.x_up, config.detector_positions.x_down];
    cross_sections.extend(&config.rsu_positions);
    RoadLayout {
        length: config.road_length,
        lane_count: config.lane_count,
        bottleneck: config.bottleneck,
        mobil: config.mobil,
        trucks_avoid_left_lane: config.trucks_avoid_left_lane,
        cross_sections,
    }
}

/// Runs the whole scenario. Deterministic in `(config, series)`.
pub fn simulate(
    config: &ScenarioConfig,
    series: &FlowSeries,
    mut options: SimOptions<'_>,
) -> Result<SimulationOutput, SimError> {
    let dt = config.time_step;
    let steps = (config.sim_duration / dt).round() as u64;
    let record_every = ((config.record_period / dt).round() as u64).max(1);
    let mut world = World::new(road_layout(config));
    let mut injector = Injector::new(config.car, config.truck, config.probe_fraction);
    let mut rngs = RunRngs::from_seed(config.rng_seed);
    let mut field = SpeedFieldBuilder::new(config.road_length, config.sim_duration, config.cell_size, config.bin_size);
    let mut vehicles: Vec<VehicleLog> = Vec::new();
    let mut detector_passages: [Vec<Passage>; 2] = [Vec::new(), Vec::new()];
    let mut lane_changes = 0u64;

    if let Some(out) = options.trajectory_out.as_mut() {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
    }

    for k in 0..steps {
        let t = k as f64 * dt;
        for veh in injector.inject(&mut world, series, t, dt, &mut rngs)? {
            debug_assert_eq!(veh.id as usize, vehicles.len());
            vehicles.push(VehicleLog {
                id: veh.id,
                class: veh.class,
                t_enter: t,
                t_exit: None,
                probe_draw: veh.probe_draw,
                records: Vec::new(),
                rsu_passages: Vec::new(),
            });
        }
        if k % record_every == 0 {
            for veh in world.vehicles() {
                if veh.probe_draw < options.record_cap {
                    vehicles[veh.id as usize].records.push(TrajectoryPoint { t, x: veh.x, v: veh.v });
                }
            }
            if let Some(out) = options.trajectory_out.as_mut() {
                for veh in world.vehicles() {
                    writeln!(out, "{t},{},{},{},{},{},{}", veh.id, veh.lane, veh.x, veh.v, veh.class, u8::from(veh.is_probe))?;
                }
            }
        }
        for veh in world.vehicles() {
            field.add(t, veh.x, veh.v);
        }

        let report = world.step(dt)?;
        lane_changes += report.lane_changes as u64;
        for c in &report.crossings {
            if c.section < 2 {
                detector_passages[c.section].push(Passage { t: c.t, vehicle_id: c.vehicle_id });
            } else {
                vehicles[c.vehicle_id as usize].rsu_passages.push(c.t);
            }
        }
        for e in &report.exits {
            vehicles[e.vehicle_id as usize].t_exit = Some(e.t);
        }
        debug_assert_eq!(world.injected() - world.exited(), world.vehicle_count() as u64);
    }

    for log in &mut vehicles {
        log.rsu_passages.sort_by(f64::total_cmp);
    }
    for passages in &mut detector_passages {
        passages.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.vehicle_id.cmp(&b.vehicle_id)));
    }
    Ok(SimulationOutput {
        vehicles,
        detector_passages,
        speed_field: field.finish(),
        record_cap: options.record_cap,
        injected: world.injected(),
        exited: world.exited(),
        on_road_at_end: world.vehicle_count(),
        lane_changes,
    })
}
