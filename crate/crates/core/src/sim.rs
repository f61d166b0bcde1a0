//! Deterministic discrete-event simulation of a drone fleet executing
//! deliveries through a skyway network under the nearest-first allocation
//! protocol: fly to the assigned recharging station, charge to the 4.15 V
//! threshold (queueing for a pad if necessary), then continue to the
//! destination. A pad release immediately launches or admits the next drone.
//!
//! One run executes as a single sequential event loop on the 0.1 s grid and
//! is a pure function of its inputs and seed. Distinct runs share no state
//! and may execute in parallel.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::FlightLogRecord;
use crate::energy::{self, relative_wind_angle, CompassDir, EnergyModel, WindField};
use crate::grid::{self, TICK_MILLIS, TICK_SECONDS};
use crate::network::{distance, heading, NetworkError, Point, SkywayNetwork};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("duplicate drone id {0:?}")]
    DuplicateDroneId(String),
    #[error("mission for {drone:?} references unknown node {node:?}")]
    UnknownNode { drone: String, node: String },
    #[error("mission for {0:?} has identical source and destination")]
    SameSourceDestination(String),
    #[error("mission for {drone:?} starts at {voltage} V, above the recharge asymptote")]
    InvalidInitialVoltage { drone: String, voltage: f64 },
    #[error("no path source -> station -> destination exists for drone {drone:?}")]
    InfeasibleMission { drone: String },
    #[error("simulation exceeded the internal tick limit")]
    TickLimitExceeded,
}

/// One delivery mission: fly from `source` to `destination`, recharging on
/// the way per protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mission {
    pub drone: String,
    pub source: String,
    pub destination: String,
    pub initial_voltage: f64,
}

/// Which station a held drone flies to when a pad releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeldLaunch {
    /// The station whose pad released (the paper's protocol).
    #[default]
    FirstPadToFree,
    /// Its originally assigned nearest station, once that one releases.
    AssignedStation,
}

/// When drones leave their sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaunchDiscipline {
    /// One drone per occupied station launches at t = 0; every later launch
    /// is triggered by a pad release.
    #[default]
    Staggered,
    /// Everyone launches at t = 0 and contends for pads on arrival.
    Immediate,
}

/// Station-allocation policy. Only nearest-first allocation exists; the two
/// knobs select the held-launch target and the launch discipline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Policy {
    #[serde(default)]
    pub held_launch: HeldLaunch,
    #[serde(default)]
    pub launch: LaunchDiscipline,
}

impl Policy {
    pub fn nearest_first() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Failed,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "completed",
            Outcome::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEventKind {
    Launched { station: String },
    ArrivedStation { station: String, voltage: f64 },
    ChargeStart { station: String, voltage: f64 },
    ChargeEnd { station: String, voltage: f64 },
    ArrivedDestination { voltage: f64 },
    Failed { voltage: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    #[serde(rename = "t_s", with = "crate::grid::ticks_as_seconds")]
    pub ticks: u64,
    pub drone: String,
    #[serde(flatten)]
    pub kind: SimEventKind,
}

/// Per-drone outcome of one run. Tick totals satisfy
/// `completion = flight + recharge + waiting` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneReport {
    pub id: String,
    pub outcome: Outcome,
    pub assigned_station: String,
    /// Where the drone actually charged; `None` if it arrived full and
    /// skipped the pad.
    pub charged_at: Option<String>,
    pub initial_voltage: f64,
    pub final_voltage: f64,
    pub odometer_m: f64,
    #[serde(rename = "flight_s", with = "crate::grid::ticks_as_seconds")]
    pub flight_ticks: u64,
    #[serde(rename = "recharge_s", with = "crate::grid::ticks_as_seconds")]
    pub recharge_ticks: u64,
    #[serde(rename = "waiting_s", with = "crate::grid::ticks_as_seconds")]
    pub waiting_ticks: u64,
    #[serde(rename = "completion_s", with = "crate::grid::ticks_as_seconds")]
    pub completion_ticks: u64,
    pub log: Vec<FlightLogRecord>,
}

/// Result of one fleet run: per-drone reports in mission order, the
/// chronological event trace, and the fleet makespan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionResult {
    pub drones: Vec<DroneReport>,
    pub events: Vec<SimEvent>,
    #[serde(rename = "makespan_s", with = "crate::grid::ticks_as_seconds")]
    pub makespan_ticks: u64,
}

impl MissionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn drone(&self, id: &str) -> Option<&DroneReport> {
        self.drones.iter().find(|d| d.id == id)
    }
}

/// Map each drone to its nearest station and order launches globally by
/// ascending distance to the assigned station, ties by drone id.
pub fn assign_nearest_first(
    drones: &[(String, Point)],
    network: &SkywayNetwork,
) -> Result<Vec<(String, String)>, SimError> {
    let mut seen = std::collections::HashSet::new();
    for (id, _) in drones {
        if !seen.insert(id.as_str()) {
            return Err(SimError::DuplicateDroneId(id.clone()));
        }
    }
    let mut plan: Vec<(f64, String, String)> = Vec::with_capacity(drones.len());
    for (id, pos) in drones {
        let station = network.nearest_station(*pos)?;
        let station_pos = network.node_by_id(station).unwrap().position;
        plan.push((distance(*pos, station_pos), id.clone(), station.to_string()));
    }
    plan.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(plan.into_iter().map(|(_, id, st)| (id, st)).collect())
}

#[derive(Debug, Clone)]
struct RtLeg {
    from: usize,
    to: usize,
    length: f64,
    heading: Option<f64>,
    dur: u64,
}

fn legs_of_path(network: &SkywayNetwork, path: &[usize], cruise: f64) -> Vec<RtLeg> {
    path.windows(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            let length = network
                .neighbors(a)
                .filter(|&(other, _, _)| other == b)
                .map(|(_, _, len)| len)
                .fold(f64::INFINITY, f64::min);
            RtLeg {
                from: a,
                to: b,
                length,
                heading: heading(network.node(a).position, network.node(b).position).ok(),
                dur: grid::leg_ticks(length, cruise),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Held,
    Enroute,
    Queued(usize),
    Charging(usize),
    Done,
    Failed,
}

struct DroneRt {
    id: String,
    source: usize,
    dest: usize,
    assigned: usize,
    phase: Phase,
    launch_tick: Option<u64>,
    completion_tick: Option<u64>,
    voltage: f64,
    initial_voltage: f64,
    position: Point,
    heading: Option<f64>,
    odometer: f64,
    legs: Vec<RtLeg>,
    station_leg_end: usize,
    cursor: usize,
    leg_elapsed: u64,
    pending_node: bool,
    pending_fail: bool,
    charged: bool,
    charged_at: Option<usize>,
    claim: Option<usize>,
    admit_tick: u64,
    admit_voltage: f64,
    charge_end: u64,
    flight_ticks: u64,
    recharge_ticks: u64,
    waiting_ticks: u64,
    noise: ChaCha8Rng,
    attitude: ChaCha8Rng,
    log: Vec<FlightLogRecord>,
}

struct StationRt {
    node: usize,
    pads: u32,
    queue: VecDeque<usize>,
    charging: Vec<usize>,
}

struct Runtime<'a> {
    network: &'a SkywayNetwork,
    model: &'a EnergyModel,
    wind: WindField,
    policy: Policy,
    drones: Vec<DroneRt>,
    order: Vec<usize>,
    held: VecDeque<usize>,
    stations: Vec<StationRt>,
    events: Vec<SimEvent>,
}

const TICK_LIMIT: u64 = 100_000_000;

impl<'a> Runtime<'a> {
    fn station_slot(&self, node: usize) -> usize {
        self.stations
            .iter()
            .position(|s| s.node == node)
            .expect("node is a station")
    }

    fn emit(&mut self, ticks: u64, drone: usize, kind: SimEventKind) {
        self.events.push(SimEvent {
            ticks,
            drone: self.drones[drone].id.clone(),
            kind,
        });
    }

    fn build_route(&self, drone: usize, target: usize) -> Option<(Vec<RtLeg>, usize)> {
        let d = &self.drones[drone];
        let (to_station, _) = self.network.shortest_path(d.source, target)?;
        let (to_dest, _) = self.network.shortest_path(target, d.dest)?;
        let first = legs_of_path(self.network, &to_station, self.model.cruise_speed);
        let mut legs = first;
        let station_leg_end = legs.len();
        legs.extend(legs_of_path(self.network, &to_dest, self.model.cruise_speed));
        Some((legs, station_leg_end))
    }

    /// Launch a held drone toward `target` at tick `t`. Returns a station
    /// slot whose claim was released immediately (source at the station and
    /// already above threshold).
    fn launch(&mut self, drone: usize, target: usize, t: u64) -> Option<usize> {
        let route = self
            .build_route(drone, target)
            .or_else(|| self.build_route(drone, self.drones[drone].assigned));
        let (legs, station_leg_end) = route.expect("launch routes are prevalidated");
        let target_slot = self.station_slot(if legs.is_empty() || station_leg_end == 0 {
            target
        } else {
            legs[station_leg_end - 1].to
        });

        {
            let d = &mut self.drones[drone];
            d.legs = legs;
            d.station_leg_end = station_leg_end;
            d.cursor = 0;
            d.leg_elapsed = 0;
            d.launch_tick = Some(t);
            d.claim = Some(target_slot);
            d.phase = Phase::Enroute;
            d.heading = d.legs.first().and_then(|l| l.heading);
        }
        let station_id = self.network.node(self.stations[target_slot].node).id.clone();
        self.emit(t, drone, SimEventKind::Launched { station: station_id });

        if station_leg_end == 0 {
            // already standing on the target station
            return self.arrive_at_station(drone, target_slot, t);
        }
        None
    }

    /// Handle arrival at the drone's target station. Returns the slot if the
    /// drone skipped charging (its pad claim releases).
    fn arrive_at_station(&mut self, drone: usize, slot: usize, t: u64) -> Option<usize> {
        let station_id = self.network.node(self.stations[slot].node).id.clone();
        let voltage = self.drones[drone].voltage;
        self.emit(
            t,
            drone,
            SimEventKind::ArrivedStation {
                station: station_id,
                voltage,
            },
        );
        if voltage >= self.model.v_full {
            let d = &mut self.drones[drone];
            d.charged = true;
            d.claim = None;
            if d.cursor == d.legs.len() {
                d.phase = Phase::Done;
                d.completion_tick = Some(t);
                let v = d.voltage;
                self.emit(t, drone, SimEventKind::ArrivedDestination { voltage: v });
            } else {
                d.phase = Phase::Enroute;
            }
            Some(slot)
        } else {
            self.drones[drone].phase = Phase::Queued(slot);
            self.stations[slot].queue.push_back(drone);
            None
        }
    }

    fn admit(&mut self, drone: usize, slot: usize, t: u64) {
        let station_id = self.network.node(self.stations[slot].node).id.clone();
        let d = &mut self.drones[drone];
        d.phase = Phase::Charging(slot);
        d.admit_tick = t;
        d.admit_voltage = d.voltage;
        d.charge_end = t + energy::recharge_ticks(self.model, d.voltage).expect("voltage below asymptote");
        d.charged_at = Some(self.stations[slot].node);
        let voltage = d.voltage;
        self.stations[slot].charging.push(drone);
        self.emit(
            t,
            drone,
            SimEventKind::ChargeStart {
                station: station_id,
                voltage,
            },
        );
    }

    fn pick_held(&mut self, slot: usize) -> Option<usize> {
        match self.policy.held_launch {
            HeldLaunch::FirstPadToFree => self.held.pop_front(),
            HeldLaunch::AssignedStation => {
                let node = self.stations[slot].node;
                let pos = self.held.iter().position(|&d| self.drones[d].assigned == node)?;
                self.held.remove(pos)
            }
        }
    }

    fn boundary(&mut self, t: u64) {
        let n_stations = self.stations.len();
        let mut releases = vec![0u32; n_stations];

        // failures decided during the previous interval
        for idx in 0..self.order.len() {
            let drone = self.order[idx];
            if !self.drones[drone].pending_fail {
                continue;
            }
            let d = &mut self.drones[drone];
            d.pending_fail = false;
            if let Phase::Queued(slot) = d.phase {
                let queue = &mut self.stations[slot].queue;
                queue.retain(|&q| q != drone);
            }
            let claim = if !self.drones[drone].charged {
                self.drones[drone].claim.take()
            } else {
                None
            };
            if let Some(slot) = claim {
                releases[slot] += 1;
            }
            let d = &mut self.drones[drone];
            d.phase = Phase::Failed;
            d.completion_tick = Some(t);
            let v = d.voltage;
            self.emit(t, drone, SimEventKind::Failed { voltage: v });
        }

        // charge completions: depart, release the pad
        for idx in 0..self.order.len() {
            let drone = self.order[idx];
            let slot = match self.drones[drone].phase {
                Phase::Charging(slot) if self.drones[drone].charge_end == t => slot,
                _ => continue,
            };
            self.stations[slot].charging.retain(|&c| c != drone);
            releases[slot] += 1;
            let station_id = self.network.node(self.stations[slot].node).id.clone();
            let voltage = self.drones[drone].voltage;
            self.emit(
                t,
                drone,
                SimEventKind::ChargeEnd {
                    station: station_id,
                    voltage,
                },
            );
            let d = &mut self.drones[drone];
            d.charged = true;
            d.claim = None;
            if d.cursor == d.legs.len() {
                d.phase = Phase::Done;
                d.completion_tick = Some(t);
                let v = d.voltage;
                self.emit(t, drone, SimEventKind::ArrivedDestination { voltage: v });
            } else {
                d.phase = Phase::Enroute;
            }
        }

        // arrivals from legs that finished during the last interval
        for idx in 0..self.order.len() {
            let drone = self.order[idx];
            if self.drones[drone].phase != Phase::Enroute || !self.drones[drone].pending_node {
                continue;
            }
            let d = &mut self.drones[drone];
            d.pending_node = false;
            let node = d.legs[d.cursor].to;
            d.cursor += 1;
            d.position = self.network.node(node).position;
            let at_station = !d.charged && d.cursor == d.station_leg_end;
            let at_end = d.cursor == d.legs.len();
            if at_station {
                let slot = self.station_slot(node);
                if let Some(released) = self.arrive_at_station(drone, slot, t) {
                    releases[released] += 1;
                }
            } else if at_end {
                let d = &mut self.drones[drone];
                d.phase = Phase::Done;
                d.completion_tick = Some(t);
                let v = d.voltage;
                self.emit(t, drone, SimEventKind::ArrivedDestination { voltage: v });
            }
        }

        // pad admissions, FIFO by queue arrival; an admission consumes the
        // release that freed the pad
        for slot in 0..n_stations {
            while self.stations[slot].charging.len() < self.stations[slot].pads as usize {
                let Some(&next) = self.stations[slot].queue.front() else {
                    break;
                };
                self.stations[slot].queue.pop_front();
                self.admit(next, slot, t);
                releases[slot] = releases[slot].saturating_sub(1);
            }
        }

        // each unconsumed release triggers one held launch
        if t == 0 {
            match self.policy.launch {
                LaunchDiscipline::Staggered => {
                    for slot in 0..n_stations {
                        let pads = self.stations[slot].pads;
                        let node = self.stations[slot].node;
                        for _ in 0..pads {
                            let pos = self
                                .held
                                .iter()
                                .position(|&d| self.drones[d].assigned == node);
                            let Some(pos) = pos else { break };
                            let drone = self.held.remove(pos).unwrap();
                            if let Some(released) = self.launch(drone, node, 0) {
                                releases[released] += 1;
                            }
                        }
                    }
                }
                LaunchDiscipline::Immediate => {
                    while let Some(drone) = self.held.pop_front() {
                        let target = self.drones[drone].assigned;
                        if let Some(released) = self.launch(drone, target, 0) {
                            releases[released] += 1;
                        }
                    }
                }
            }
        }
        loop {
            let Some(slot) = (0..n_stations).find(|&s| releases[s] > 0) else {
                break;
            };
            releases[slot] -= 1;
            let Some(drone) = self.pick_held(slot) else {
                continue;
            };
            let target = self.stations[slot].node;
            if let Some(released) = self.launch(drone, target, t) {
                releases[released] += 1;
            }
        }
    }

    fn all_finished(&self) -> bool {
        self.drones
            .iter()
            .all(|d| matches!(d.phase, Phase::Done | Phase::Failed))
    }

    fn interval(&mut self, _t: u64) {
        let wind = self.wind;
        let calm = wind.is_calm();
        let half_width = self.model.noise_gain * wind.speed_ms();
        for idx in 0..self.order.len() {
            let drone = self.order[idx];
            match self.drones[drone].phase {
                Phase::Held => {
                    self.drones[drone].waiting_ticks += 1;
                }
                Phase::Queued(_) => {
                    let floor = self.model.v_low;
                    let d = &mut self.drones[drone];
                    d.waiting_ticks += 1;
                    d.voltage -= TICK_SECONDS * self.model.base_drain;
                    if d.voltage < floor {
                        d.voltage = floor;
                        d.pending_fail = true;
                    }
                }
                Phase::Charging(_) => {
                    let d = &mut self.drones[drone];
                    d.recharge_ticks += 1;
                    let since = _t + 1 - d.admit_tick;
                    d.voltage = energy::recharge_voltage_after(self.model, d.admit_voltage, since);
                }
                Phase::Enroute => {
                    let rate = {
                        let d = &self.drones[drone];
                        energy::drain_rate_leg(self.model, self.wind, d.legs[d.cursor].heading)
                    };
                    let v_inf = self.model.recharge_asymptote;
                    let floor = self.model.v_low;
                    let d = &mut self.drones[drone];
                    let leg = &d.legs[d.cursor];
                    d.flight_ticks += 1;
                    d.leg_elapsed += 1;
                    d.odometer += leg.length / leg.dur as f64;
                    if d.leg_elapsed >= leg.dur {
                        d.position = self.network.node(leg.to).position;
                    } else {
                        let f = d.leg_elapsed as f64 / leg.dur as f64;
                        let a = self.network.node(leg.from).position;
                        let b = self.network.node(leg.to).position;
                        d.position = [
                            a[0] + (b[0] - a[0]) * f,
                            a[1] + (b[1] - a[1]) * f,
                            a[2] + (b[2] - a[2]) * f,
                        ];
                    }
                    d.voltage -= TICK_SECONDS * rate;
                    if !calm && half_width > 0.0 {
                        d.voltage += rng::symmetric(&mut d.noise, half_width);
                    }
                    d.voltage = d.voltage.min(v_inf);
                    if d.voltage < floor {
                        d.voltage = floor;
                        d.pending_fail = true;
                    } else if d.leg_elapsed >= leg.dur {
                        d.pending_node = true;
                        d.leg_elapsed = 0;
                    }
                }
                Phase::Done | Phase::Failed => {}
            }
        }
    }
}

/// Execute a fleet run. Event-driven on the 0.1 s grid; fully deterministic
/// for a fixed seed. A drone whose voltage reaches the floor mid-flight is
/// reported as failed; the run itself continues.
pub fn run_mission(
    network: &SkywayNetwork,
    missions: &[Mission],
    wind: WindField,
    model: &EnergyModel,
    policy: Policy,
    seed: u64,
) -> Result<MissionResult, SimError> {
    model
        .validate()
        .map_err(|e| SimError::Network(NetworkError::File(e.to_string())))?;

    let mut drones = Vec::with_capacity(missions.len());
    for (i, m) in missions.iter().enumerate() {
        let source = network
            .node_index(&m.source)
            .ok_or_else(|| SimError::UnknownNode {
                drone: m.drone.clone(),
                node: m.source.clone(),
            })?;
        let dest = network
            .node_index(&m.destination)
            .ok_or_else(|| SimError::UnknownNode {
                drone: m.drone.clone(),
                node: m.destination.clone(),
            })?;
        if source == dest {
            return Err(SimError::SameSourceDestination(m.drone.clone()));
        }
        if m.initial_voltage > model.recharge_asymptote {
            return Err(SimError::InvalidInitialVoltage {
                drone: m.drone.clone(),
                voltage: m.initial_voltage,
            });
        }
        let assigned_id = network.nearest_station(network.node(source).position)?;
        let assigned = network.node_index(assigned_id).unwrap();
        if network.shortest_path(source, assigned).is_none()
            || network.shortest_path(assigned, dest).is_none()
        {
            return Err(SimError::InfeasibleMission {
                drone: m.drone.clone(),
            });
        }
        drones.push(DroneRt {
            id: m.drone.clone(),
            source,
            dest,
            assigned,
            phase: Phase::Held,
            launch_tick: None,
            completion_tick: None,
            voltage: m.initial_voltage,
            initial_voltage: m.initial_voltage,
            position: network.node(source).position,
            heading: None,
            odometer: 0.0,
            legs: Vec::new(),
            station_leg_end: 0,
            cursor: 0,
            leg_elapsed: 0,
            pending_node: false,
            pending_fail: false,
            charged: false,
            charged_at: None,
            claim: None,
            admit_tick: 0,
            admit_voltage: 0.0,
            charge_end: 0,
            flight_ticks: 0,
            recharge_ticks: 0,
            waiting_ticks: 0,
            noise: rng::seeded(rng::derive_seed(seed, 2 * i as u64)),
            attitude: rng::seeded(rng::derive_seed(seed, 2 * i as u64 + 1)),
            log: Vec::new(),
        });
    }

    let positions: Vec<(String, Point)> = missions
        .iter()
        .map(|m| {
            let idx = network.node_index(&m.source).unwrap();
            (m.drone.clone(), network.node(idx).position)
        })
        .collect();
    let plan = assign_nearest_first(&positions, network)?;
    let order: Vec<usize> = plan
        .iter()
        .map(|(id, _)| drones.iter().position(|d| &d.id == id).unwrap())
        .collect();

    let stations: Vec<StationRt> = network
        .stations()
        .iter()
        .map(|&node| StationRt {
            node,
            pads: network.node(node).pads,
            queue: VecDeque::new(),
            charging: Vec::new(),
        })
        .collect();

    let mut rt = Runtime {
        network,
        model,
        wind,
        policy,
        drones,
        held: order.iter().copied().collect(),
        order,
        stations,
        events: Vec::new(),
    };

    let mut t = 0u64;
    loop {
        if t > TICK_LIMIT {
            return Err(SimError::TickLimitExceeded);
        }
        rt.boundary(t);
        write_records(&mut rt, t);
        if rt.all_finished() {
            break;
        }
        rt.interval(t);
        t += 1;
    }

    let makespan = rt
        .drones
        .iter()
        .filter_map(|d| d.completion_tick)
        .max()
        .unwrap_or(0);
    let reports = rt
        .drones
        .into_iter()
        .map(|d| DroneReport {
            id: d.id,
            outcome: if matches!(d.phase, Phase::Failed) {
                Outcome::Failed
            } else {
                Outcome::Completed
            },
            assigned_station: network.node(d.assigned).id.clone(),
            charged_at: d.charged_at.map(|n| network.node(n).id.clone()),
            initial_voltage: d.initial_voltage,
            final_voltage: d.voltage,
            odometer_m: d.odometer,
            flight_ticks: d.flight_ticks,
            recharge_ticks: d.recharge_ticks,
            waiting_ticks: d.waiting_ticks,
            completion_ticks: d.completion_tick.unwrap_or(0),
            log: d.log,
        })
        .collect();

    Ok(MissionResult {
        drones: reports,
        events: rt.events,
        makespan_ticks: makespan,
    })
}

fn write_records(rt: &mut Runtime, t: u64) {
    let wind = rt.wind;
    let calm = wind.is_calm();
    let half = 0.15;
    for drone in 0..rt.drones.len() {
        let launched = matches!(rt.drones[drone].launch_tick, Some(lt) if lt <= t);
        let finished_before = matches!(rt.drones[drone].completion_tick, Some(ct) if ct < t);
        if !launched || finished_before {
            continue;
        }
        let charging = matches!(rt.drones[drone].phase, Phase::Charging(_));
        let rel = match (calm, rt.drones[drone].heading) {
            (false, Some(h)) => Some(relative_wind_angle(h, wind).expect("windy")),
            _ => None,
        };
        let (roll, pitch) = if charging {
            (0.0, 0.0)
        } else {
            let d = &mut rt.drones[drone];
            let jr = rng::symmetric(&mut d.attitude, half);
            let jp = rng::symmetric(&mut d.attitude, half);
            match rel {
                Some(angle) => {
                    let w = wind.speed_ms();
                    let rad = angle.to_radians();
                    (1.2 * w * rad.sin() + jr, 1.2 * w * rad.cos() + jp)
                }
                None => (jr, jp),
            }
        };
        let d = &mut rt.drones[drone];
        d.log.push(FlightLogRecord {
            timestamp_ms: t * TICK_MILLIS,
            x: d.position[0],
            y: d.position[1],
            z: d.position[2],
            roll,
            pitch,
            yaw: d.heading.unwrap_or(0.0),
            voltage: d.voltage,
            rel_wind_dir: rel,
            travel_distance: d.odometer,
            waiting_time: grid::seconds(d.waiting_ticks),
        });
    }
}

/// Configuration of the scenario matrix. Defaults reproduce the 70-run
/// layout: two station configurations x five path sets x (calm + two wind
/// speeds x three wind directions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixConfig {
    pub stations: Vec<u8>,
    pub path_sets: Vec<u8>,
    pub wind_speeds_kmh: Vec<f64>,
    pub wind_directions: Vec<CompassDir>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            stations: vec![1, 2],
            path_sets: vec![1, 2, 3, 4, 5],
            wind_speeds_kmh: vec![6.1, 7.6],
            wind_directions: vec![CompassDir::N, CompassDir::S, CompassDir::E],
        }
    }
}

impl MatrixConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unique = |v: &[u8]| v.iter().collect::<std::collections::HashSet<_>>().len() == v.len();
        if self.stations.is_empty() || !self.stations.iter().all(|s| (1..=2).contains(s)) || !unique(&self.stations) {
            return Err(format!("stations {:?} must be distinct values from {{1, 2}}", self.stations));
        }
        if self.path_sets.is_empty() || !self.path_sets.iter().all(|p| (1..=5).contains(p)) || !unique(&self.path_sets) {
            return Err(format!("path_sets {:?} must be distinct values from 1..=5", self.path_sets));
        }
        if self.wind_speeds_kmh.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(format!("wind_speeds_kmh {:?} must be positive", self.wind_speeds_kmh));
        }
        if self.wind_directions.is_empty() || self.wind_speeds_kmh.is_empty() {
            return Err("wind_speeds_kmh and wind_directions must be nonempty".into());
        }
        Ok(())
    }
}

/// One entry of the scenario matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub stations: u8,
    pub path_set: u8,
    pub wind_speed_kmh: f64,
    pub wind_dir: Option<CompassDir>,
}

impl RunSpec {
    pub fn wind(&self) -> WindField {
        match self.wind_dir {
            Some(dir) => WindField::from_compass(self.wind_speed_kmh, dir),
            None => WindField::CALM,
        }
    }
}

/// Expand a matrix configuration into run specifications: per station
/// configuration and path set, one calm run plus every speed x direction
/// combination (the calm-air collapse).
pub fn scenario_matrix(config: &MatrixConfig) -> Vec<RunSpec> {
    let mut specs = Vec::new();
    for &stations in &config.stations {
        for &path_set in &config.path_sets {
            specs.push(RunSpec {
                stations,
                path_set,
                wind_speed_kmh: 0.0,
                wind_dir: None,
            });
            for &speed in &config.wind_speeds_kmh {
                for &dir in &config.wind_directions {
                    specs.push(RunSpec {
                        stations,
                        path_set,
                        wind_speed_kmh: speed,
                        wind_dir: Some(dir),
                    });
                }
            }
        }
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, NodeSpec, SegmentSpec};

    fn model() -> EnergyModel {
        EnergyModel::default()
    }

    /// source - station(dest) line: one segment, destination is the station.
    fn adjacent_net() -> SkywayNetwork {
        build_network(
            vec![
                NodeSpec::waypoint("src", [0.0, 0.0, 0.5]),
                NodeSpec::station("dst", [0.0, 0.8, 0.5], 1),
            ],
            vec![SegmentSpec::new("src", "dst")],
        )
        .unwrap()
    }

    #[test]
    fn assign_orders_by_distance_then_id() {
        let net = build_network(vec![NodeSpec::station("S", [0.0, 0.0, 0.0], 1)], vec![]).unwrap();
        let drones = vec![
            ("E7".to_string(), [3.0, 0.0, 0.0]),
            ("E3".to_string(), [1.0, 0.0, 0.0]),
            ("E5".to_string(), [2.0, 0.0, 0.0]),
        ];
        let plan = assign_nearest_first(&drones, &net).unwrap();
        let ids: Vec<&str> = plan.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["E3", "E5", "E7"]);

        let tie = vec![
            ("B".to_string(), [1.0, 0.0, 0.0]),
            ("A".to_string(), [-1.0, 0.0, 0.0]),
        ];
        let plan = assign_nearest_first(&tie, &net).unwrap();
        assert_eq!(plan[0].0, "A");

        let dup = vec![
            ("A".to_string(), [0.0; 3]),
            ("A".to_string(), [1.0, 0.0, 0.0]),
        ];
        assert_eq!(
            assign_nearest_first(&dup, &net).unwrap_err(),
            SimError::DuplicateDroneId("A".into())
        );
    }

    #[test]
    fn assign_splits_between_stations() {
        let net = build_network(
            vec![
                NodeSpec::station("A", [0.0, 0.5, 0.5], 1),
                NodeSpec::station("B", [0.7, 0.4, 0.5], 1),
            ],
            vec![],
        )
        .unwrap();
        let drones = vec![
            ("E3".to_string(), [0.1, 0.5, 0.5]),
            ("E5".to_string(), [0.6, 0.4, 0.5]),
            ("E7".to_string(), [0.3, 0.45, 0.5]),
        ];
        let plan = assign_nearest_first(&drones, &net).unwrap();
        let map: std::collections::HashMap<_, _> =
            plan.iter().map(|(d, s)| (d.as_str(), s.as_str())).collect();
        assert_eq!(map["E3"], "A");
        assert_eq!(map["E5"], "B");
        assert_eq!(map["E7"], "A");
    }

    #[test]
    fn single_drone_direct_mission() {
        // destination doubles as the station; ample voltage means no
        // recharge stop, so completion is pure flight time
        let net = adjacent_net();
        let missions = vec![Mission {
            drone: "E3".into(),
            source: "src".into(),
            destination: "dst".into(),
            initial_voltage: 4.2,
        }];
        let result = run_mission(&net, &missions, WindField::CALM, &model(), Policy::default(), 1).unwrap();
        let d = &result.drones[0];
        // 0.8 m at 0.2 m/s = 4 s = 40 ticks
        assert_eq!(d.completion_ticks, 40);
        assert_eq!(d.flight_ticks, 40);
        assert_eq!(d.recharge_ticks, 0);
        assert_eq!(d.waiting_ticks, 0);
        assert_eq!(d.outcome, Outcome::Completed);
        assert_eq!(result.makespan_ticks, 40);
        assert_eq!(d.log.len(), 41);
        assert!((d.odometer_m - 0.8).abs() < 1e-9);
        // calm-air drain is exact
        assert!((d.final_voltage - (4.2 - 4.0 * 0.002)).abs() < 1e-12);
    }

    #[test]
    fn charging_drone_waits_for_threshold() {
        let net = adjacent_net();
        let missions = vec![Mission {
            drone: "E3".into(),
            source: "src".into(),
            destination: "dst".into(),
            initial_voltage: 4.0,
        }];
        let m = model();
        let result = run_mission(&net, &missions, WindField::CALM, &m, Policy::default(), 1).unwrap();
        let d = &result.drones[0];
        assert_eq!(d.outcome, Outcome::Completed);
        assert!(d.recharge_ticks > 0);
        assert!(d.final_voltage >= m.v_full);
        assert_eq!(
            d.completion_ticks,
            d.flight_ticks + d.recharge_ticks + d.waiting_ticks
        );
        let charge_end = result
            .events
            .iter()
            .find(|e| matches!(e.kind, SimEventKind::ChargeEnd { .. }))
            .unwrap();
        match &charge_end.kind {
            SimEventKind::ChargeEnd { voltage, .. } => assert!(*voltage >= m.v_full),
            _ => unreachable!(),
        }
    }

    #[test]
    fn identical_seeds_give_identical_results() {
        let net = adjacent_net();
        let missions = vec![Mission {
            drone: "E3".into(),
            source: "src".into(),
            destination: "dst".into(),
            initial_voltage: 4.0,
        }];
        let wind = WindField::from_compass(6.1, CompassDir::N);
        let a = run_mission(&net, &missions, wind, &model(), Policy::default(), 7).unwrap();
        let b = run_mission(&net, &missions, wind, &model(), Policy::default(), 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = run_mission(&net, &missions, wind, &model(), Policy::default(), 8).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn mission_validation_errors() {
        let net = adjacent_net();
        let m = model();
        let mission = |drone: &str, src: &str, dst: &str| Mission {
            drone: drone.into(),
            source: src.into(),
            destination: dst.into(),
            initial_voltage: 4.0,
        };
        assert!(matches!(
            run_mission(&net, &[mission("E3", "src", "nowhere")], WindField::CALM, &m, Policy::default(), 1),
            Err(SimError::UnknownNode { .. })
        ));
        assert!(matches!(
            run_mission(&net, &[mission("E3", "src", "src")], WindField::CALM, &m, Policy::default(), 1),
            Err(SimError::SameSourceDestination(_))
        ));
        let both = [mission("E3", "src", "dst"), mission("E3", "dst", "src")];
        assert!(matches!(
            run_mission(&net, &both, WindField::CALM, &m, Policy::default(), 1),
            Err(SimError::DuplicateDroneId(_))
        ));
        let mut over = mission("E3", "src", "dst");
        over.initial_voltage = 4.5;
        assert!(matches!(
            run_mission(&net, &[over], WindField::CALM, &m, Policy::default(), 1),
            Err(SimError::InvalidInitialVoltage { .. })
        ));

        // disconnected station: mission cannot route through it
        let disconnected = build_network(
            vec![
                NodeSpec::waypoint("a", [0.0, 0.0, 0.5]),
                NodeSpec::waypoint("b", [0.0, 1.0, 0.5]),
                NodeSpec::station("S", [5.0, 5.0, 0.5], 1),
            ],
            vec![SegmentSpec::new("a", "b")],
        )
        .unwrap();
        assert!(matches!(
            run_mission(&disconnected, &[mission("E3", "a", "b")], WindField::CALM, &m, Policy::default(), 1),
            Err(SimError::InfeasibleMission { .. })
        ));
    }

    #[test]
    fn low_voltage_mid_flight_fails_the_drone() {
        // long corridor, tiny battery margin above the floor
        let net = build_network(
            vec![
                NodeSpec::waypoint("src", [0.0, 0.0, 0.5]),
                NodeSpec::station("dst", [0.0, 40.0, 0.5], 1),
            ],
            vec![SegmentSpec::new("src", "dst")],
        )
        .unwrap();
        let m = model();
        let missions = vec![Mission {
            drone: "E3".into(),
            source: "src".into(),
            destination: "dst".into(),
            initial_voltage: 3.21,
        }];
        let result = run_mission(&net, &missions, WindField::CALM, &m, Policy::default(), 1).unwrap();
        let d = &result.drones[0];
        assert_eq!(d.outcome, Outcome::Failed);
        assert_eq!(d.final_voltage, m.v_low);
        assert_eq!(
            d.completion_ticks,
            d.flight_ticks + d.recharge_ticks + d.waiting_ticks
        );
        assert!(matches!(
            result.events.last().unwrap().kind,
            SimEventKind::Failed { .. }
        ));
    }

    #[test]
    fn immediate_launch_creates_fifo_pad_queue() {
        // three drones race to one pad; admissions must follow arrival order.
        // fast recharge keeps the hover drain of the queued drones survivable
        let net = build_network(
            vec![
                NodeSpec::waypoint("a", [0.0, 0.2, 0.5]),
                NodeSpec::waypoint("b", [0.0, 0.4, 0.5]),
                NodeSpec::waypoint("c", [0.0, 0.6, 0.5]),
                NodeSpec::station("S", [0.0, 0.0, 0.5], 1),
                NodeSpec::waypoint("d1", [0.4, 0.0, 0.5]),
                NodeSpec::waypoint("d2", [0.5, 0.0, 0.5]),
                NodeSpec::waypoint("d3", [0.6, 0.0, 0.5]),
            ],
            vec![
                SegmentSpec::new("a", "S"),
                SegmentSpec::new("b", "S"),
                SegmentSpec::new("c", "S"),
                SegmentSpec::new("S", "d1"),
                SegmentSpec::new("S", "d2"),
                SegmentSpec::new("S", "d3"),
            ],
        )
        .unwrap();
        let fast_charge = EnergyModel {
            recharge_tau: 30.0,
            ..model()
        };
        let mission = |drone: &str, src: &str, dst: &str| Mission {
            drone: drone.into(),
            source: src.into(),
            destination: dst.into(),
            initial_voltage: 4.0,
        };
        let missions = [
            mission("E3", "a", "d1"),
            mission("E5", "b", "d2"),
            mission("E7", "c", "d3"),
        ];
        let policy = Policy {
            launch: LaunchDiscipline::Immediate,
            ..Policy::default()
        };
        let result = run_mission(&net, &missions, WindField::CALM, &fast_charge, policy, 1).unwrap();

        // all launch at t = 0
        let launches: Vec<u64> = result
            .events
            .iter()
            .filter(|e| matches!(e.kind, SimEventKind::Launched { .. }))
            .map(|e| e.ticks)
            .collect();
        assert_eq!(launches, vec![0, 0, 0]);

        // arrival order by distance: E3, E5, E7; charge starts in the same order
        let arrivals: Vec<&str> = result
            .events
            .iter()
            .filter(|e| matches!(e.kind, SimEventKind::ArrivedStation { .. }))
            .map(|e| e.drone.as_str())
            .collect();
        assert_eq!(arrivals, ["E3", "E5", "E7"]);
        let starts: Vec<&str> = result
            .events
            .iter()
            .filter(|e| matches!(e.kind, SimEventKind::ChargeStart { .. }))
            .map(|e| e.drone.as_str())
            .collect();
        assert_eq!(starts, ["E3", "E5", "E7"]);

        // never more than one drone on the single pad
        let mut on_pad = 0i32;
        for e in &result.events {
            match e.kind {
                SimEventKind::ChargeStart { .. } => {
                    on_pad += 1;
                    assert!(on_pad <= 1);
                }
                SimEventKind::ChargeEnd { .. } => on_pad -= 1,
                _ => {}
            }
        }

        // the two latecomers hover and drain while waiting
        let e5 = result.drone("E5").unwrap();
        let e7 = result.drone("E7").unwrap();
        assert!(e5.waiting_ticks > 0);
        assert!(e7.waiting_ticks > e5.waiting_ticks);
        for d in &result.drones {
            assert_eq!(
                d.completion_ticks,
                d.flight_ticks + d.recharge_ticks + d.waiting_ticks
            );
        }
    }

    #[test]
    fn skip_charge_triggers_next_launch() {
        // E3 arrives above the threshold, skips the pad, and its claim
        // release must still launch the held E5 at that instant
        let net = build_network(
            vec![
                NodeSpec::waypoint("a", [0.0, 0.2, 0.5]),
                NodeSpec::waypoint("b", [0.0, 0.4, 0.5]),
                NodeSpec::station("S", [0.0, 0.0, 0.5], 1),
                NodeSpec::waypoint("d1", [0.4, 0.0, 0.5]),
                NodeSpec::waypoint("d2", [0.5, 0.0, 0.5]),
            ],
            vec![
                SegmentSpec::new("a", "S"),
                SegmentSpec::new("b", "S"),
                SegmentSpec::new("S", "d1"),
                SegmentSpec::new("S", "d2"),
            ],
        )
        .unwrap();
        let missions = [
            Mission {
                drone: "E3".into(),
                source: "a".into(),
                destination: "d1".into(),
                initial_voltage: 4.2,
            },
            Mission {
                drone: "E5".into(),
                source: "b".into(),
                destination: "d2".into(),
                initial_voltage: 4.2,
            },
        ];
        let result = run_mission(&net, &missions, WindField::CALM, &model(), Policy::default(), 1).unwrap();
        assert!(result
            .events
            .iter()
            .all(|e| !matches!(e.kind, SimEventKind::ChargeStart { .. })));
        let e3_arrival = result
            .events
            .iter()
            .find(|e| e.drone == "E3" && matches!(e.kind, SimEventKind::ArrivedStation { .. }))
            .unwrap()
            .ticks;
        let e5_launch = result
            .events
            .iter()
            .find(|e| e.drone == "E5" && matches!(e.kind, SimEventKind::Launched { .. }))
            .unwrap()
            .ticks;
        assert_eq!(e3_arrival, e5_launch);
        assert_eq!(result.drone("E3").unwrap().charged_at, None);
    }

    #[test]
    fn failure_enroute_releases_the_claim() {
        // E3 cannot reach the station; its failure must free the slot so E5
        // still launches
        let net = build_network(
            vec![
                NodeSpec::waypoint("far", [0.0, 60.0, 0.5]),
                NodeSpec::waypoint("b", [0.0, 0.4, 0.5]),
                NodeSpec::station("S", [0.0, 0.0, 0.5], 1),
                NodeSpec::waypoint("d1", [0.4, 0.0, 0.5]),
                NodeSpec::waypoint("d2", [0.5, 0.0, 0.5]),
            ],
            vec![
                SegmentSpec::new("far", "S"),
                SegmentSpec::new("b", "S"),
                SegmentSpec::new("S", "d1"),
                SegmentSpec::new("S", "d2"),
            ],
        )
        .unwrap();
        let missions = [
            Mission {
                drone: "E3".into(),
                source: "b".into(),
                destination: "d1".into(),
                initial_voltage: 3.9,
            },
            Mission {
                drone: "E5".into(),
                source: "far".into(),
                destination: "d2".into(),
                initial_voltage: 3.25,
            },
        ];
        // E3 is closer, launches first, charges; E5 launches on E3's release
        // and dies on the 60 m approach; nothing deadlocks
        let result = run_mission(&net, &missions, WindField::CALM, &model(), Policy::default(), 1).unwrap();
        assert_eq!(result.drone("E3").unwrap().outcome, Outcome::Completed);
        assert_eq!(result.drone("E5").unwrap().outcome, Outcome::Failed);
    }

    #[test]
    fn matrix_counts() {
        let specs = scenario_matrix(&MatrixConfig::default());
        assert_eq!(specs.len(), 70);
        let calm = specs.iter().filter(|s| s.wind_dir.is_none()).count();
        assert_eq!(calm, 10);

        let minimal = MatrixConfig {
            stations: vec![1],
            path_sets: vec![1],
            wind_speeds_kmh: vec![6.1],
            wind_directions: vec![CompassDir::N],
        };
        assert_eq!(scenario_matrix(&minimal).len(), 2);

        // 2 configs x 5 paths x (1 + 2 * 3)
        let full = MatrixConfig::default();
        assert_eq!(scenario_matrix(&full).len(), 2 * 5 * 7);
    }

    #[test]
    fn matrix_config_validation() {
        assert!(MatrixConfig::default().validate().is_ok());
        let bad = MatrixConfig {
            stations: vec![3],
            ..MatrixConfig::default()
        };
        assert!(bad.validate().is_err());
        let dup = MatrixConfig {
            path_sets: vec![1, 1],
            ..MatrixConfig::default()
        };
        assert!(dup.validate().is_err());
    }
}
