use super::bottleneck::BottleneckSpec;
use super::idm::{idm_accel_with_gap_param, DriverParams, VehicleClass};
use super::mobil::{change_margin, choose, CurrentAccels, LaneChange, LaneNeighbors, LaneVehicle, MobilParams};
use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: u64,
    pub class: VehicleClass,
    pub params: DriverParams,
    /// 0 is the rightmost lane.
    pub lane: usize,
    /// Front-bumper position (m).
    pub x: f64,
    pub v: f64,
    pub is_probe: bool,
    /// Uniform draw behind the probe flag; a vehicle is a probe at fraction
    /// `f` iff `probe_draw < f`.
    pub probe_draw: f64,
}

impl VehicleState {
    #[inline]
    pub fn rear(&self) -> f64 {
        self.x - self.params.length
    }
}

/// Static road description the world needs while stepping.
#[derive(Debug, Clone)]
pub struct RoadLayout {
    pub length: f64,
    pub lane_count: usize,
    pub bottleneck: BottleneckSpec,
    pub mobil: MobilParams,
    /// Trucks may not use the leftmost lane (ignored on single-lane roads).
    pub trucks_avoid_left_lane: bool,
    /// Cross-sections whose passages are reported (detectors, roadside units).
    pub cross_sections: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub section: usize,
    pub vehicle_id: u64,
    pub lane: usize,
    /// Passage time, linearly interpolated inside the step.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    pub vehicle_id: u64,
    pub t: f64,
}

/// Events produced by one call to [`World::step`].
#[derive(Debug, Default, Clone)]
pub struct StepReport {
    pub crossings: Vec<Crossing>,
    pub exits: Vec<Exit>,
    pub lane_changes: usize,
}

#[derive(Debug, Clone, Copy)]
struct Decision {
    lane: usize,
    id: u64,
    x: f64,
    target: usize,
}

/// Multi-lane road state. Each lane keeps its vehicles ordered by position,
/// most downstream first.
#[derive(Debug, Clone)]
pub struct World {
    layout: RoadLayout,
    steps: u64,
    dt_total: f64,
    lanes: Vec<Vec<VehicleState>>,
    accel: Vec<Vec<f64>>,
    injected: u64,
    exited: u64,
    decisions: Vec<Decision>,
    report: StepReport,
}

impl World {
    pub fn new(layout: RoadLayout) -> Self {
        let n = layout.lane_count;
        World {
            layout,
            steps: 0,
            dt_total: 0.0,
            lanes: vec![Vec::new(); n],
            accel: vec![Vec::new(); n],
            injected: 0,
            exited: 0,
            decisions: Vec::new(),
            report: StepReport::default(),
        }
    }

    pub fn layout(&self) -> &RoadLayout {
        &self.layout
    }

    /// Simulation clock (s).
    pub fn time(&self) -> f64 {
        self.dt_total
    }

    pub fn lanes(&self) -> &[Vec<VehicleState>] {
        &self.lanes
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleState> {
        self.lanes.iter().flatten()
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    pub fn lane_allowed(&self, class: VehicleClass, lane: usize) -> bool {
        let n = self.layout.lane_count;
        !(class == VehicleClass::Truck && self.layout.trucks_avoid_left_lane && n > 1 && lane == n - 1)
    }

    /// Places a vehicle on its lane, keeping the lane ordered. Fails if it
    /// would overlap a neighbor.
    pub fn insert(&mut self, vehicle: VehicleState) -> Result<(), SimError> {
        let lane = vehicle.lane;
        if lane >= self.layout.lane_count {
            return Err(SimError::InvalidLane(lane));
        }
        let vehicles = &mut self.lanes[lane];
        let k = vehicles.partition_point(|w| w.x > vehicle.x);
        if k > 0 && vehicles[k - 1].rear() - vehicle.x < 0.0 {
            return Err(SimError::Overlap { id: vehicle.id, lane });
        }
        if k < vehicles.len() && vehicle.rear() - vehicles[k].x < 0.0 {
            return Err(SimError::Overlap { id: vehicle.id, lane });
        }
        vehicles.insert(k, vehicle);
        self.injected += 1;
        Ok(())
    }

    /// The most upstream vehicle of a lane.
    pub fn last_in_lane(&self, lane: usize) -> Option<&VehicleState> {
        self.lanes[lane].last()
    }

    /// Advances the world by `dt`: lane changes on the pre-step snapshot,
    /// accelerations on the post-change snapshot, then a ballistic update.
    pub fn step(&mut self, dt: f64) -> Result<&StepReport, SimError> {
        let t = self.dt_total;
        self.report.crossings.clear();
        self.report.exits.clear();
        self.report.lane_changes = 0;

        if self.layout.lane_count > 1 {
            self.compute_accelerations(t);
            self.decide_lane_changes(t);
            self.apply_lane_changes(t);
        }
        self.compute_accelerations(t);
        self.advance(t, dt)?;

        self.steps += 1;
        self.dt_total = self.steps as f64 * dt;
        Ok(&self.report)
    }

    fn compute_accelerations(&mut self, t: f64) {
        let bn = &self.layout.bottleneck;
        for (vehicles, acc) in self.lanes.iter().zip(self.accel.iter_mut()) {
            acc.clear();
            acc.reserve(vehicles.len());
            for (i, veh) in vehicles.iter().enumerate() {
                let p = &veh.params;
                let tg = p.time_gap * bn.multiplier(veh.x, t);
                let a = if i == 0 {
                    idm_accel_with_gap_param(p, tg, veh.v, f64::INFINITY, 0.0)
                } else {
                    let lead = &vehicles[i - 1];
                    idm_accel_with_gap_param(p, tg, veh.v, lead.rear() - veh.x, veh.v - lead.v)
                };
                acc.push(a);
            }
        }
    }

    fn lane_vehicle<'a>(&self, v: &'a VehicleState, t: f64) -> LaneVehicle<'a> {
        LaneVehicle { x: v.x, v: v.v, params: &v.params, time_gap: v.params.time_gap * self.layout.bottleneck.multiplier(v.x, t) }
    }

    /// Leader/follower of position `x` on `lane`, plus the follower's current
    /// acceleration. `skip_id` excludes the subject itself.
    fn neighbors_at(&self, lane: usize, x: f64, t: f64) -> (LaneNeighbors<'_>, f64) {
        let vehicles = &self.lanes[lane];
        let k = vehicles.partition_point(|w| w.x > x);
        let leader = (k > 0).then(|| self.lane_vehicle(&vehicles[k - 1], t));
        let follower = vehicles.get(k).map(|f| self.lane_vehicle(f, t));
        let follower_acc = if k < vehicles.len() { self.accel[lane][k] } else { 0.0 };
        (LaneNeighbors { leader, follower }, follower_acc)
    }

    fn decide_lane_changes(&mut self, t: f64) {
        let mut decisions = std::mem::take(&mut self.decisions);
        decisions.clear();
        let n = self.layout.lane_count;
        let mp = self.layout.mobil;
        for lane in 0..n {
            let vehicles = &self.lanes[lane];
            for (i, veh) in vehicles.iter().enumerate() {
                let subject = self.lane_vehicle(veh, t);
                let current = LaneNeighbors {
                    leader: (i > 0).then(|| self.lane_vehicle(&vehicles[i - 1], t)),
                    follower: vehicles.get(i + 1).map(|f| self.lane_vehicle(f, t)),
                };
                let now = CurrentAccels {
                    subject: self.accel[lane][i],
                    old_follower: self.accel[lane].get(i + 1).copied().unwrap_or(0.0),
                };
                let eval = |target_lane: usize| {
                    let (target, before) = self.neighbors_at(target_lane, veh.x, t);
                    change_margin(&subject, &current, &target, now, before, &mp)
                };
                let left = (lane + 1 < n && self.lane_allowed(veh.class, lane + 1)).then(|| eval(lane + 1)).flatten();
                let right = (lane > 0).then(|| eval(lane - 1)).flatten();
                let target = match choose(left, right) {
                    LaneChange::Stay => continue,
                    LaneChange::ChangeLeft => lane + 1,
                    LaneChange::ChangeRight => lane - 1,
                };
                decisions.push(Decision { lane, id: veh.id, x: veh.x, target });
            }
        }
        self.decisions = decisions;
    }

    /// MOBIL margin of vehicle `i` of `lane` for moving to `target`,
    /// evaluated on the live lane contents.
    fn live_margin(&self, lane: usize, i: usize, target: usize, t: f64) -> Option<f64> {
        let vehicles = &self.lanes[lane];
        let subject = self.lane_vehicle(&vehicles[i], t);
        let current = LaneNeighbors {
            leader: (i > 0).then(|| self.lane_vehicle(&vehicles[i - 1], t)),
            follower: vehicles.get(i + 1).map(|f| self.lane_vehicle(f, t)),
        };
        let now = CurrentAccels {
            subject: subject.accel_behind(current.leader.as_ref())?,
            old_follower: current.follower.as_ref().and_then(|f| f.accel_behind(Some(&subject))).unwrap_or(0.0),
        };
        let dst = &self.lanes[target];
        let k = dst.partition_point(|w| w.x > subject.x);
        let target_lane = LaneNeighbors {
            leader: (k > 0).then(|| self.lane_vehicle(&dst[k - 1], t)),
            follower: dst.get(k).map(|f| self.lane_vehicle(f, t)),
        };
        let before = match &target_lane.follower {
            Some(f) => f.accel_behind(target_lane.leader.as_ref())?,
            None => 0.0,
        };
        change_margin(&subject, &current, &target_lane, now, before, &self.layout.mobil)
    }

    /// Applies the decided changes in order. Each one is re-evaluated on
    /// the lanes as already modified by earlier changes of this step and
    /// dropped if it is no longer safe or no longer pays off.
    fn apply_lane_changes(&mut self, t: f64) {
        let decisions = std::mem::take(&mut self.decisions);
        for d in &decisions {
            let src = &self.lanes[d.lane];
            let mut i = src.partition_point(|w| w.x > d.x);
            while i < src.len() && src[i].id != d.id {
                i += 1;
            }
            debug_assert!(i < src.len(), "vehicle {} vanished from lane {}", d.id, d.lane);
            if self.live_margin(d.lane, i, d.target, t).is_none() {
                continue;
            }
            let mut veh = self.lanes[d.lane].remove(i);
            let k = self.lanes[d.target].partition_point(|w| w.x > veh.x);
            veh.lane = d.target;
            self.lanes[d.target].insert(k, veh);
            self.report.lane_changes += 1;
        }
        self.decisions = decisions;
    }

    fn advance(&mut self, t: f64, dt: f64) -> Result<(), SimError> {
        let sections = &self.layout.cross_sections;
        for (lane, (vehicles, acc)) in self.lanes.iter_mut().zip(&self.accel).enumerate() {
            for (veh, &a) in vehicles.iter_mut().zip(acc) {
                let x_old = veh.x;
                let v_new = veh.v + a * dt;
                if v_new < 0.0 {
                    // stops within the step; no reversing
                    veh.x -= 0.5 * veh.v * veh.v / a;
                    veh.v = 0.0;
                } else {
                    veh.x += veh.v * dt + 0.5 * a * dt * dt;
                    veh.v = v_new;
                }
                for (section, &s) in sections.iter().enumerate() {
                    if x_old < s && veh.x >= s {
                        let frac = (s - x_old) / (veh.x - x_old);
                        self.report.crossings.push(Crossing { section, vehicle_id: veh.id, lane, t: t + frac * dt });
                    }
                }
            }
            for pair in vehicles.windows(2) {
                let gap = pair[0].rear() - pair[1].x;
                if gap < 0.0 {
                    return Err(SimError::Collision { t: t + dt, lane, leader: pair[0].id, follower: pair[1].id, gap });
                }
            }
            let gone = vehicles.partition_point(|w| w.x > self.layout.length);
            for veh in vehicles.drain(..gone) {
                self.report.exits.push(Exit { vehicle_id: veh.id, t: t + dt });
            }
            self.exited += gone as u64;
        }
        Ok(())
    }
}
