//! Fixed-timestep world state and stepping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::platoon::{GapControllerParams, Platoon, PlatoonSpec, PlatoonSummary};
use crate::sim::idm::IdmParams;
use crate::sim::lane_change::{Direction, LaneChangeParams, TargetGap};
use crate::sim::road::RoadNetwork;
use crate::sim::vehicle::{PlatoonSlot, Vehicle, VehicleKind};

/// Spacing the integrator keeps between a follower's front and its leader's rear.
const GUARD_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSpec {
    /// Vehicles per hour per mainline lane.
    pub mainline_rate: f64,
    /// Vehicles per hour on the ramp.
    pub ramp_rate: f64,
    pub injection_speed: f64,
    pub ramp_injection_speed: f64,
    pub seed: u64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self { mainline_rate: 3600.0, ramp_rate: 1200.0, injection_speed: 25.0, ramp_injection_speed: 20.0, seed: 0 }
    }
}

impl FlowSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str| SimError::Config { key: format!("flow.{key}"), reason: "must be non-negative".into() };
        for (key, v) in [
            ("mainline_rate", self.mainline_rate),
            ("ramp_rate", self.ramp_rate),
            ("injection_speed", self.injection_speed),
            ("ramp_injection_speed", self.ramp_injection_speed),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad(key));
            }
        }
        Ok(())
    }
}

/// Everything the simulator needs apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub road: RoadNetwork,
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
    pub flow: FlowSpec,
    pub gap_controller: GapControllerParams,
    pub platoons: Vec<PlatoonSpec>,
    /// Hard speed cap as a multiple of the speed limit.
    pub max_speed_ratio: f64,
    /// Vehicle body lengths are drawn uniformly from this range.
    pub vehicle_length: (f64, f64),
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            road: RoadNetwork::default(),
            idm: IdmParams::default(),
            lane_change: LaneChangeParams::default(),
            flow: FlowSpec::default(),
            gap_controller: GapControllerParams::default(),
            platoons: vec![PlatoonSpec::default()],
            max_speed_ratio: 1.1,
            vehicle_length: (4.0, 5.0),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.flow.validate()?;
        self.gap_controller.validate()?;
        let bad = |key: String, reason: &str| SimError::Config { key, reason: reason.into() };
        if !(self.lane_change.assertiveness > 0.0) {
            return Err(bad("lane_change.assertiveness".into(), "must be positive"));
        }
        if !(self.lane_change.max_safe_decel > 0.0) {
            return Err(bad("lane_change.max_safe_decel".into(), "must be positive"));
        }
        if !(self.max_speed_ratio >= 1.0) {
            return Err(bad("max_speed_ratio".into(), "must be at least 1"));
        }
        let (lo, hi) = self.vehicle_length;
        if !(lo > 0.0 && hi >= lo) {
            return Err(bad("vehicle_length".into(), "need 0 < min <= max"));
        }
        for (i, p) in self.platoons.iter().enumerate() {
            if p.size < 2 {
                return Err(SimError::PlatoonTooSmall(p.size));
            }
            if let Some(lane) = p.lane {
                if lane >= self.road.mainline_lanes {
                    return Err(bad(format!("platoons[{i}].lane"), "not a mainline lane"));
                }
            }
            if !(p.default_gap_m >= crate::platoon::GAP_MIN && p.default_gap_m <= crate::platoon::GAP_MAX) {
                return Err(bad(format!("platoons[{i}].default_gap_m"), "must lie in [2, 30] m"));
            }
        }
        Ok(())
    }
}

/// A vehicle that left the segment downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    pub id: u64,
    pub kind: VehicleKind,
    pub entry_time: f64,
    pub entry_position: f64,
    pub exit_time: f64,
}

impl ExitRecord {
    /// Traversal time scaled to a full-segment trip.
    pub fn normalized_delay(&self, segment_length: f64) -> f64 {
        let distance = segment_length - self.entry_position;
        (self.exit_time - self.entry_time) * segment_length / distance
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Vehicles that arrived, including those still queued at an entry.
    pub injected: u64,
    pub exited: u64,
    pub lane_changes: u64,
    pub merges: u64,
    /// Ticks on which the integrator had to cap a vehicle to avoid contact.
    pub guard_interventions: u64,
}

#[derive(Debug, Clone)]
struct PendingPlatoon {
    spec: PlatoonSpec,
    lane: usize,
    form_at: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub time: f64,
    pub tick: u64,
    pub vehicles: Vec<Vehicle>,
    pub platoons: Vec<Platoon>,
    pub exits: Vec<ExitRecord>,
    pub counters: Counters,
    idm: IdmParams,
    v_max: f64,
    pending: Vec<PendingPlatoon>,
    rng: ChaCha8Rng,
    next_arrival: Vec<f64>,
    queues: Vec<u64>,
    next_id: u64,
    /// Per lane, vehicle indices sorted by position, front first.
    lanes: Vec<Vec<usize>>,
    /// Per platoon, vehicle index of each member still on the road.
    members: Vec<Vec<Option<usize>>>,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let road = config.road;
        let idm = config.idm.with_desired_speed(road.speed_limit);
        let v_max = road.speed_limit * config.max_speed_ratio;
        let mut rng = ChaCha8Rng::seed_from_u64(config.flow.seed);
        let lane_count = road.lane_count();
        let mut next_arrival = vec![f64::INFINITY; lane_count];
        for (lane, slot) in next_arrival.iter_mut().enumerate() {
            let rate = Self::lane_rate(&config, lane);
            if rate > 0.0 {
                *slot = Exp::new(rate / 3600.0).unwrap().sample(&mut rng);
            }
        }
        let pending = config
            .platoons
            .iter()
            .map(|spec| {
                let lane = spec.lane.unwrap_or(road.merge_target_lane());
                let travel = road.merge_zone_start / config.flow.injection_speed.max(1e-9);
                PendingPlatoon { spec: spec.clone(), lane, form_at: (spec.scheduled_arrival_s - travel).max(0.0) }
            })
            .collect();
        Ok(Self {
            time: 0.0,
            tick: 0,
            vehicles: Vec::new(),
            platoons: Vec::new(),
            exits: Vec::new(),
            counters: Counters::default(),
            idm,
            v_max,
            pending,
            rng,
            next_arrival,
            queues: vec![0; lane_count],
            next_id: 0,
            lanes: vec![Vec::new(); lane_count],
            members: Vec::new(),
            config,
        })
    }

    fn lane_rate(config: &WorldConfig, lane: usize) -> f64 {
        if config.road.is_ramp(lane) {
            config.flow.ramp_rate
        } else {
            config.flow.mainline_rate
        }
    }

    pub fn road(&self) -> &RoadNetwork {
        &self.config.road
    }

    pub fn idm(&self) -> &IdmParams {
        &self.idm
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn queued(&self) -> u64 {
        self.queues.iter().sum()
    }

    pub fn queue_lengths(&self) -> &[u64] {
        &self.queues
    }

    /// Vehicle indices on `lane`, front first.
    pub fn lane_order(&self, lane: usize) -> &[usize] {
        &self.lanes[lane]
    }

    pub fn vehicle(&self, id: u64) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn platoon(&self, id: u64) -> Option<&Platoon> {
        self.platoons.iter().find(|p| p.id == id)
    }

    pub fn platoon_mut(&mut self, id: u64) -> Option<&mut Platoon> {
        self.platoons.iter_mut().find(|p| p.id == id)
    }

    /// Platoons not yet formed.
    pub fn pending_platoons(&self) -> usize {
        self.pending.len()
    }

    /// Add a vehicle directly, bypassing injection. Used to build scenes.
    pub fn spawn(&mut self, lane: usize, position: f64, speed: f64, length: f64, kind: VehicleKind) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.counters.injected += 1;
        self.vehicles.push(Vehicle {
            id,
            lane,
            position,
            speed,
            accel: 0.0,
            length,
            kind,
            assertiveness: self.config.lane_change.assertiveness,
            platoon: None,
            entry_time: self.time,
            entry_position: position,
        });
        self.reindex();
        id
    }

    /// Queue a platoon for formation; it enters once its lane is clear at
    /// `form_at` or later. Returns nothing until formed; see [`Self::platoons`].
    pub fn schedule_platoon(&mut self, spec: PlatoonSpec, form_at: f64) -> Result<()> {
        if spec.size < 2 {
            return Err(SimError::PlatoonTooSmall(spec.size));
        }
        let lane = spec.lane.unwrap_or(self.config.road.merge_target_lane());
        if lane >= self.config.road.mainline_lanes {
            return Err(SimError::IllegalLane(lane));
        }
        self.pending.push(PendingPlatoon { spec, lane, form_at });
        Ok(())
    }

    fn reindex(&mut self) {
        for l in self.lanes.iter_mut() {
            l.clear();
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            self.lanes[v.lane].push(i);
        }
        let vehicles = &self.vehicles;
        for l in self.lanes.iter_mut() {
            l.sort_by(|&a, &b| vehicles[b].position.total_cmp(&vehicles[a].position).then(a.cmp(&b)));
        }
        for m in self.members.iter_mut() {
            m.fill(None);
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if let Some(slot) = v.platoon {
                self.members[slot.platoon][slot.index] = Some(i);
            }
        }
    }

    /// Leader and follower around `position` in `lane`, ignoring `skip`.
    fn neighbours(&self, lane: usize, position: f64, skip: usize) -> (Option<usize>, Option<usize>) {
        let order = &self.lanes[lane];
        let k = order.partition_point(|&i| self.vehicles[i].position >= position);
        let lead = order[..k].iter().rev().copied().find(|&i| i != skip);
        let follow = order[k..].iter().copied().find(|&i| i != skip);
        (lead, follow)
    }

    /// Gap and speed of whatever is ahead of a front bumper at `position`.
    fn ahead(&self, lane: usize, position: f64, lead: Option<usize>) -> (f64, f64) {
        match lead {
            Some(l) => (self.vehicles[l].rear() - position, self.vehicles[l].speed),
            None => (self.config.road.lane_end(lane) - position, 0.0),
        }
    }

    fn target_gap(&self, idx: usize, target: usize) -> (TargetGap, Option<usize>, Option<usize>) {
        let v = &self.vehicles[idx];
        let (lead, follow) = self.neighbours(target, v.position, idx);
        let (front_gap, lead_speed) = self.ahead(target, v.position, lead);
        let (rear_gap, follower_speed) = match follow {
            Some(f) => (v.rear() - self.vehicles[f].position, self.vehicles[f].speed),
            None => (f64::INFINITY, 0.0),
        };
        (TargetGap { front_gap, lead_speed, rear_gap, follower_speed }, lead, follow)
    }

    fn legal_target(&self, idx: usize, dir: Direction) -> Option<usize> {
        let road = &self.config.road;
        let v = &self.vehicles[idx];
        let target = dir.target(v.lane)?;
        match v.kind {
            VehicleKind::PlatoonLeader | VehicleKind::PlatoonMember => None,
            VehicleKind::Merging => {
                (road.is_ramp(v.lane) && target == road.merge_target_lane() && road.in_merge_zone(v.position))
                    .then_some(target)
            }
            VehicleKind::Free => {
                (v.lane < road.mainline_lanes && target < road.mainline_lanes && v.position >= 0.0).then_some(target)
            }
        }
    }

    fn accel_behind(&self, speed: f64, gap: f64, lead_speed: f64) -> f64 {
        self.idm.accel(speed, gap.max(1e-3), lead_speed)
    }

    /// Score of changing `idx` into `target`: `None` if rejected, otherwise
    /// the own acceleration gain used to rank directions.
    fn evaluate_change(&self, idx: usize, target: usize) -> Option<f64> {
        let v = &self.vehicles[idx];
        let lc = &self.config.lane_change;
        let (g, _lead, follow) = self.target_gap(idx, target);
        if !lc.gap_acceptable(v.speed, v.assertiveness, &g) {
            return None;
        }
        if v.kind == VehicleKind::Merging {
            return Some(f64::INFINITY);
        }
        let (cur_lead, _) = self.neighbours(v.lane, v.position + 1e-9, idx);
        let (gap_now, lead_now) = self.ahead(v.lane, v.position, cur_lead);
        let own_before = self.accel_behind(v.speed, gap_now, lead_now);
        let own_after = self.accel_behind(v.speed, g.front_gap, g.lead_speed);
        let (follower_before, follower_after) = match follow {
            Some(f) => {
                let fv = &self.vehicles[f];
                let before = self.accel_behind(fv.speed, g.rear_gap + v.length + g.front_gap, g.lead_speed);
                let after = self.accel_behind(fv.speed, g.rear_gap, v.speed);
                (before, after)
            }
            None => (0.0, 0.0),
        };
        lc.mobil_incentive(own_before, own_after, follower_before, follower_after).then_some(own_after - own_before)
    }

    /// Whether vehicle `id` would change lanes in `dir` right now.
    pub fn lane_change_decision(&self, id: u64, dir: Direction) -> Result<bool> {
        let idx = self.vehicles.iter().position(|v| v.id == id).ok_or(SimError::UnknownVehicle(id))?;
        let v = &self.vehicles[idx];
        let target = self.legal_target(idx, dir).ok_or(SimError::IllegalLane(dir.target(v.lane).unwrap_or(usize::MAX)))?;
        Ok(self.evaluate_change(idx, target).is_some())
    }

    fn move_to_lane(&mut self, idx: usize, target: usize) {
        let from = self.vehicles[idx].lane;
        self.lanes[from].retain(|&i| i != idx);
        let pos = self.vehicles[idx].position;
        let vehicles = &self.vehicles;
        let at = self.lanes[target].partition_point(|&i| vehicles[i].position >= pos);
        self.lanes[target].insert(at, idx);
        let v = &mut self.vehicles[idx];
        v.lane = target;
        self.counters.lane_changes += 1;
        if v.kind == VehicleKind::Merging {
            v.kind = VehicleKind::Free;
            self.counters.merges += 1;
        }
    }

    fn lane_changes(&mut self) {
        for idx in 0..self.vehicles.len() {
            let choices = [Direction::Left, Direction::Right]
                .into_iter()
                .filter_map(|d| self.legal_target(idx, d))
                .filter_map(|t| self.evaluate_change(idx, t).map(|gain| (t, gain)));
            let best = choices.fold(None, |best: Option<(usize, f64)>, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            });
            if let Some((target, _)) = best {
                self.move_to_lane(idx, target);
            }
        }
    }

    /// A merging vehicle also follows the nearest vehicle ahead in the
    /// target lane, braking no harder than comfortably, so it drops in
    /// behind it instead of riding alongside.
    fn seek_gap_accel(&self, idx: usize) -> f64 {
        let road = &self.config.road;
        let v = &self.vehicles[idx];
        if !road.is_ramp(v.lane) {
            return f64::INFINITY;
        }
        let (lead, _) = self.neighbours(road.merge_target_lane(), v.position, idx);
        match lead {
            Some(l) => {
                let lv = &self.vehicles[l];
                // Hang back by whatever the front-gap requirement adds on top
                // of the car-following standstill gap.
                let lc = &self.config.lane_change;
                let margin = (lc.required_front_gap(v.speed, v.assertiveness) - self.idm.min_gap).max(0.0);
                self.accel_behind(v.speed, lv.rear() - v.position - margin, lv.speed).max(-self.idm.comfort_decel)
            }
            None => f64::INFINITY,
        }
    }

    /// Courtesy toward the nearest merging vehicle ahead on the ramp, taken
    /// only when it needs no more than comfortable braking.
    fn yield_accel(&self, idx: usize) -> f64 {
        let road = &self.config.road;
        let v = &self.vehicles[idx];
        if v.lane != road.merge_target_lane() {
            return f64::INFINITY;
        }
        let (lead, _) = self.neighbours(road.ramp_lane(), v.position, idx);
        let Some(m) = lead.map(|l| &self.vehicles[l]) else {
            return f64::INFINITY;
        };
        if m.kind != VehicleKind::Merging || !road.in_merge_zone(m.position) {
            return f64::INFINITY;
        }
        // Leave the rear gap the merger will insist on.
        let lc = &self.config.lane_change;
        let margin = (lc.required_rear_gap(v.speed, m.assertiveness) - self.idm.min_gap).max(0.0);
        let a = self.accel_behind(v.speed, m.rear() - v.position - margin, m.speed);
        if a >= -self.idm.comfort_decel {
            a
        } else {
            f64::INFINITY
        }
    }

    fn compute_accels(&mut self) {
        let ctrl = self.config.gap_controller;
        let mut accels = vec![0.0; self.vehicles.len()];
        for lane in 0..self.lanes.len() {
            let order = &self.lanes[lane];
            for (k, &i) in order.iter().enumerate() {
                let v = &self.vehicles[i];
                let lead = (k > 0).then(|| order[k - 1]);
                let (gap, lead_speed) = self.ahead(lane, v.position, lead);
                accels[i] = match (v.kind, v.platoon) {
                    (VehicleKind::PlatoonMember, Some(slot)) => {
                        let platoon = &self.platoons[slot.platoon];
                        let setpoint = platoon.gap_setpoints[slot.index - 1];
                        let own = self.members[slot.platoon][slot.index - 1].map(|p| {
                            let pv = &self.vehicles[p];
                            (pv.rear() - v.position, pv.speed, pv.accel)
                        });
                        ctrl.member_accel(&self.idm, v.speed, setpoint, own, (gap, lead_speed))
                    }
                    (VehicleKind::Merging, _) => {
                        let own = self.accel_behind(v.speed, gap, lead_speed);
                        own.min(self.seek_gap_accel(i))
                    }
                    (VehicleKind::Free, _) => {
                        let own = self.accel_behind(v.speed, gap, lead_speed);
                        own.min(self.yield_accel(i))
                    }
                    _ => self.accel_behind(v.speed, gap, lead_speed),
                };
            }
        }
        for (v, a) in self.vehicles.iter_mut().zip(accels) {
            v.accel = a;
        }
    }

    fn integrate(&mut self, dt: f64) {
        for lane in 0..self.lanes.len() {
            let mut limit = self.config.road.lane_end(lane);
            for &i in &self.lanes[lane] {
                let v = &mut self.vehicles[i];
                let mut speed = (v.speed + v.accel * dt).clamp(0.0, self.v_max);
                let mut x = v.position + speed * dt;
                if x > limit - GUARD_GAP {
                    x = (limit - GUARD_GAP).max(v.position);
                    speed = (x - v.position) / dt;
                    self.counters.guard_interventions += 1;
                }
                v.position = x;
                v.speed = speed;
                limit = v.rear();
            }
        }
    }

    fn remove_exited(&mut self) {
        let end = self.config.road.segment_length;
        let time = self.time;
        let exits = &mut self.exits;
        let mut exited = 0;
        self.vehicles.retain(|v| {
            if v.position >= end {
                exits.push(ExitRecord {
                    id: v.id,
                    kind: v.kind,
                    entry_time: v.entry_time,
                    entry_position: v.entry_position,
                    exit_time: time,
                });
                exited += 1;
                false
            } else {
                true
            }
        });
        self.counters.exited += exited;
    }

    /// Gap from an entry at `entry` to the last vehicle in `lane`.
    fn entry_gap(&self, lane: usize, entry: f64) -> (f64, f64) {
        match self.lanes[lane].last() {
            Some(&i) => (self.vehicles[i].rear() - entry, self.vehicles[i].speed),
            None => (self.config.road.lane_end(lane) - entry, 0.0),
        }
    }

    fn draw_length(&mut self) -> f64 {
        let (lo, hi) = self.config.vehicle_length;
        if hi > lo {
            self.rng.random_range(lo..=hi)
        } else {
            lo
        }
    }

    fn form_platoons(&mut self) {
        let mut k = 0;
        while k < self.pending.len() {
            let p = &self.pending[k];
            if self.time + 1e-9 < p.form_at {
                k += 1;
                continue;
            }
            let lane = p.lane;
            let nominal = self.config.flow.injection_speed;
            let (gap, lead_speed) = self.entry_gap(lane, 0.0);
            // Same entry rule as a single vehicle, so a platoon never forms
            // at full speed behind a queue.
            let Some(speed) = self.insertion_speed(gap, lead_speed, nominal) else {
                k += 1;
                continue;
            };
            if gap < self.idm.desired_gap(speed, 0.0) {
                k += 1;
                continue;
            }
            let p = self.pending.remove(k);
            self.form(p, speed);
        }
    }

    fn form(&mut self, p: PendingPlatoon, speed: f64) {
        let platoon_index = self.platoons.len();
        let id = platoon_index as u64;
        let mut member_ids = Vec::with_capacity(p.spec.size);
        let mut front = 0.0;
        for index in 0..p.spec.size {
            let length = self.draw_length();
            let vid = self.next_id;
            self.next_id += 1;
            member_ids.push(vid);
            self.vehicles.push(Vehicle {
                id: vid,
                lane: p.lane,
                position: front,
                speed,
                accel: 0.0,
                length,
                kind: if index == 0 { VehicleKind::PlatoonLeader } else { VehicleKind::PlatoonMember },
                assertiveness: self.config.lane_change.assertiveness,
                platoon: Some(PlatoonSlot { platoon: platoon_index, index }),
                entry_time: self.time,
                entry_position: front,
            });
            front = front - length - p.spec.default_gap_m;
        }
        self.counters.injected += p.spec.size as u64;
        self.platoons.push(Platoon {
            id,
            member_ids,
            gap_setpoints: vec![p.spec.default_gap_m; p.spec.size - 1],
            default_gap: p.spec.default_gap_m,
            lane: p.lane,
            controlled: p.spec.controlled,
        });
        self.members.push(vec![None; p.spec.size]);
        self.reindex();
    }

    fn inject(&mut self) {
        let lane_count = self.lanes.len();
        for lane in 0..lane_count {
            let rate = Self::lane_rate(&self.config, lane);
            if rate > 0.0 {
                let exp = Exp::new(rate / 3600.0).unwrap();
                while self.next_arrival[lane] <= self.time {
                    self.queues[lane] += 1;
                    self.counters.injected += 1;
                    self.next_arrival[lane] += exp.sample(&mut self.rng);
                }
            }
            if self.queues[lane] == 0 || self.blocked_by_pending(lane) {
                continue;
            }
            let road = self.config.road;
            let entry = road.entry_position(lane);
            let (gap, lead_speed) = self.entry_gap(lane, entry);
            let nominal = if road.is_ramp(lane) {
                self.config.flow.ramp_injection_speed
            } else {
                self.config.flow.injection_speed
            };
            let Some(speed) = self.insertion_speed(gap, lead_speed, nominal) else {
                continue;
            };
            let length = self.draw_length();
            let id = self.next_id;
            self.next_id += 1;
            self.queues[lane] -= 1;
            self.vehicles.push(Vehicle {
                id,
                lane,
                position: entry,
                speed,
                accel: 0.0,
                length,
                kind: if road.is_ramp(lane) { VehicleKind::Merging } else { VehicleKind::Free },
                assertiveness: self.config.lane_change.assertiveness,
                platoon: None,
                entry_time: self.time,
                entry_position: entry,
            });
            let idx = self.vehicles.len() - 1;
            self.lanes[lane].push(idx);
        }
    }

    /// Fastest speed up to `nominal` at which a vehicle can enter behind a
    /// leader `gap` metres ahead: it must be able to stop comfortably and sit
    /// at or beyond its equilibrium gap. `None` means wait.
    fn insertion_speed(&self, gap: f64, lead_speed: f64, nominal: f64) -> Option<f64> {
        let room = gap - self.idm.min_gap;
        if room <= 0.0 {
            return None;
        }
        let speed = nominal
            .min(lead_speed + (2.0 * self.idm.comfort_decel * room).sqrt())
            .min(room / self.idm.time_headway.max(1e-9))
            .min(self.v_max);
        (speed >= nominal.min(lead_speed) || speed >= nominal * 0.5).then_some(speed)
    }

    /// A platoon due to form in `lane` holds back ordinary arrivals there.
    fn blocked_by_pending(&self, lane: usize) -> bool {
        self.pending.iter().any(|p| p.lane == lane && self.time + 1e-9 >= p.form_at)
    }

    /// Advance by `dt` seconds: lane changes, accelerations, integration,
    /// exits, platoon formation and injection, in that order.
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0, "dt must be positive");
        self.lane_changes();
        self.compute_accels();
        self.integrate(dt);
        self.remove_exited();
        self.time += dt;
        self.tick += 1;
        self.reindex();
        self.form_platoons();
        self.inject();
        debug_assert!(self.ordering_holds(), "lane ordering violated at t = {}", self.time);
    }

    /// Every follower's front at or behind its leader's rear.
    pub fn ordering_holds(&self) -> bool {
        self.lanes.iter().all(|order| {
            order.windows(2).all(|w| self.vehicles[w[1]].position <= self.vehicles[w[0]].rear() + 1e-9)
        }) && self.lanes.iter().enumerate().all(|(lane, order)| {
            order.first().is_none_or(|&i| self.vehicles[i].position <= self.config.road.lane_end(lane))
        })
    }

    /// Vehicles ever injected = on road + exited + waiting at an entry.
    pub fn conservation_holds(&self) -> bool {
        self.counters.injected == self.vehicles.len() as u64 + self.counters.exited + self.queued()
    }

    /// Acceleration the gap controller would give member `member_index`.
    pub fn member_accel(&self, platoon_id: u64, member_index: usize) -> Result<f64> {
        let pi = self.platoons.iter().position(|p| p.id == platoon_id).ok_or(SimError::UnknownPlatoon(platoon_id))?;
        let platoon = &self.platoons[pi];
        let vid = *platoon.member_ids.get(member_index).ok_or(SimError::UnknownVehicle(u64::MAX))?;
        let idx = self.members[pi][member_index].ok_or(SimError::UnknownVehicle(vid))?;
        let v = &self.vehicles[idx];
        let order = &self.lanes[v.lane];
        let k = order.iter().position(|&i| i == idx).expect("indexed vehicle");
        let lead = (k > 0).then(|| order[k - 1]);
        let actual = self.ahead(v.lane, v.position, lead);
        if member_index == 0 {
            return Ok(self.accel_behind(v.speed, actual.0, actual.1));
        }
        let own = self.members[pi][member_index - 1].map(|p| {
            let pv = &self.vehicles[p];
            (pv.rear() - v.position, pv.speed, pv.accel)
        });
        Ok(self.config.gap_controller.member_accel(
            &self.idm,
            v.speed,
            platoon.gap_setpoints[member_index - 1],
            own,
            actual,
        ))
    }

    /// Leader state, size and measured gaps of a platoon.
    pub fn platoon_summary(&self, platoon_id: u64) -> Result<PlatoonSummary> {
        let pi = self.platoons.iter().position(|p| p.id == platoon_id).ok_or(SimError::UnknownPlatoon(platoon_id))?;
        let platoon = &self.platoons[pi];
        let slots = &self.members[pi];
        let leader = slots.iter().flatten().next().map(|&i| &self.vehicles[i]);
        let actual_gaps = (0..platoon.size() - 1)
            .map(|i| match (slots[i], slots[i + 1]) {
                (Some(a), Some(b)) => self.vehicles[a].rear() - self.vehicles[b].position,
                _ => platoon.gap_setpoints[i],
            })
            .collect();
        Ok(PlatoonSummary {
            leader_position: leader.map_or(self.config.road.segment_length, |v| v.position),
            leader_speed: leader.map_or(0.0, |v| v.speed),
            size: platoon.size(),
            actual_gaps,
            alive: slots.iter().flatten().count(),
        })
    }

    /// Members of platoon `platoon_id` still on the road.
    pub fn platoon_alive(&self, platoon_id: u64) -> usize {
        self.platoons
            .iter()
            .position(|p| p.id == platoon_id)
            .map_or(0, |pi| self.members[pi].iter().flatten().count())
    }

    pub fn apply_gap_commands(&mut self, platoon_id: u64, gaps: &[f64]) -> Result<()> {
        self.platoon_mut(platoon_id).ok_or(SimError::UnknownPlatoon(platoon_id))?.apply_gap_commands(gaps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> WorldConfig {
        WorldConfig {
            flow: FlowSpec { mainline_rate: 0.0, ramp_rate: 0.0, ..Default::default() },
            platoons: Vec::new(),
            ..Default::default()
        }
    }

    #[test]
    fn empty_world_only_advances_time() {
        let mut w = World::new(quiet()).unwrap();
        w.step(0.1);
        assert!(w.vehicles.is_empty());
        assert!((w.time - 0.1).abs() < 1e-15);
        assert_eq!(w.tick, 1);
    }

    #[test]
    fn cruising_vehicle_advances_two_metres() {
        let mut w = World::new(quiet()).unwrap();
        let id = w.spawn(0, 100.0, 20.0, 4.5, VehicleKind::Free);
        // Cruise at the desired speed so the free-road term vanishes.
        w.config.road.speed_limit = 20.0;
        w.idm = w.idm.with_desired_speed(20.0);
        w.step(0.1);
        let v = w.vehicle(id).unwrap();
        assert_eq!(v.accel, 0.0);
        assert!((v.position - 102.0).abs() < 1e-12);
    }

    #[test]
    fn fast_follower_brakes() {
        let mut cfg = quiet();
        // One mainline lane so the follower cannot simply overtake.
        cfg.road.mainline_lanes = 1;
        let mut w = World::new(cfg).unwrap();
        w.spawn(0, 200.0, 10.0, 4.5, VehicleKind::Free);
        let f = w.spawn(0, 180.0, 20.0, 4.5, VehicleKind::Free);
        w.step(0.1);
        assert!(w.vehicle(f).unwrap().accel < 0.0);
    }

    #[test]
    fn free_vehicle_yields_to_stopped_merger_only_comfortably() {
        let mut w = World::new(quiet()).unwrap();
        w.spawn(3, 590.0, 0.0, 4.5, VehicleKind::Merging);
        let near = w.spawn(2, 570.0, 15.0, 4.5, VehicleKind::Free);
        let far = w.spawn(2, 450.0, 15.0, 4.5, VehicleKind::Free);
        w.compute_accels();
        let free = w.idm.accel(15.0, f64::INFINITY, 0.0);
        // The near one would need more than comfortable braking, so it drives on.
        assert_eq!(w.vehicle(near).unwrap().accel, free);
        let lc = w.config.lane_change;
        let margin = (lc.required_rear_gap(15.0, lc.assertiveness) - w.idm.min_gap).max(0.0);
        let gap = 590.0 - 4.5 - 450.0 - margin;
        let yielding = w.idm.accel(15.0, gap, 0.0);
        assert!(yielding < free && yielding >= -w.idm.comfort_decel);
        let lead = w.vehicle(near).unwrap();
        let behind_near = w.idm.accel(15.0, lead.rear() - 450.0, 15.0);
        assert_eq!(w.vehicle(far).unwrap().accel, yielding.min(behind_near));
    }

    #[test]
    fn merger_drops_behind_target_lane_leader() {
        let mut w = World::new(quiet()).unwrap();
        let m = w.spawn(3, 470.0, 20.0, 4.5, VehicleKind::Merging);
        w.spawn(2, 474.0, 20.0, 4.5, VehicleKind::Free);
        w.compute_accels();
        assert_eq!(w.vehicle(m).unwrap().accel, -w.idm.comfort_decel);
    }

    #[test]
    fn rejects_bad_lane_requests() {
        let mut w = World::new(quiet()).unwrap();
        let id = w.spawn(0, 100.0, 20.0, 4.5, VehicleKind::Free);
        assert!(matches!(w.lane_change_decision(id, Direction::Left), Err(SimError::IllegalLane(_))));
        assert!(matches!(w.lane_change_decision(999, Direction::Right), Err(SimError::UnknownVehicle(999))));
    }
}
