//! Service-based trajectory planning: time-optimal itineraries (route plus
//! recharge stops) for one drone, and sequential nearest-first fleet plans
//! that share a pad reservation timeline.
//!
//! `plan_route` runs a label-setting search over (node, voltage) states with
//! Pareto dominance pruning: a label arriving later with no more voltage is
//! discarded. Recharging is always to the 4.15 V threshold, never partial.
//! Waiting for a reserved pad is charged to total time and drains at the
//! calm-air hover rate, matching the simulator.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{self, EnergyModel, WindField};
use crate::grid::{self, TICK_SECONDS};
use crate::network::{distance, SkywayNetwork};
use crate::sim::Mission;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("initial voltage {0} exceeds the recharge asymptote")]
    InvalidVoltage(f64),
    #[error("no battery-feasible itinerary exists ({explored} states explored)")]
    Infeasible { explored: usize },
    #[error("mission for {drone:?} is infeasible ({explored} states explored)")]
    MissionInfeasible { drone: String, explored: usize },
    #[error("invalid energy model: {0}")]
    InvalidModel(String),
}

/// Reserved busy intervals per station, used to predict pad waits.
/// Intervals are half-open tick ranges; concurrency within a station never
/// exceeds its pad count for plans produced by this module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PadTimeline {
    stations: BTreeMap<String, StationTimeline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StationTimeline {
    pads: u32,
    #[serde(with = "busy_serde")]
    busy: Vec<(u64, u64)>,
}

mod busy_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(busy: &[(u64, u64)], s: S) -> Result<S::Ok, S::Error> {
        let secs: Vec<[f64; 2]> = busy
            .iter()
            .map(|&(a, b)| [crate::grid::seconds(a), crate::grid::seconds(b)])
            .collect();
        secs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(u64, u64)>, D::Error> {
        let secs = Vec::<[f64; 2]>::deserialize(d)?;
        secs.into_iter()
            .map(|[a, b]| {
                let to_ticks = |s: f64| {
                    let scaled = s * 10.0;
                    if !s.is_finite() || s < 0.0 || (scaled - scaled.round()).abs() > 1e-6 {
                        Err(serde::de::Error::custom(format!(
                            "interval bound {s} is not a nonnegative multiple of 0.1 s"
                        )))
                    } else {
                        Ok(scaled.round() as u64)
                    }
                };
                let (a, b) = (to_ticks(a)?, to_ticks(b)?);
                if a >= b {
                    return Err(serde::de::Error::custom("empty or reversed busy interval"));
                }
                Ok((a, b))
            })
            .collect()
    }
}

impl PadTimeline {
    /// Empty timeline with one entry per station of the network.
    pub fn for_network(network: &SkywayNetwork) -> Self {
        let stations = network
            .stations()
            .iter()
            .map(|&idx| {
                let node = network.node(idx);
                (
                    node.id.clone(),
                    StationTimeline {
                        pads: node.pads,
                        busy: Vec::new(),
                    },
                )
            })
            .collect();
        Self { stations }
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        serde_json::from_str(text).map_err(|e| PlanError::InvalidModel(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serializes")
    }

    pub fn reserve(&mut self, station: &str, start: u64, end: u64) -> Result<(), PlanError> {
        let entry = self
            .stations
            .get_mut(station)
            .ok_or_else(|| PlanError::UnknownNode(station.to_string()))?;
        let pos = entry.busy.partition_point(|&(s, _)| s <= start);
        entry.busy.insert(pos, (start, end));
        Ok(())
    }

    pub fn busy_intervals(&self, station: &str) -> &[(u64, u64)] {
        self.stations
            .get(station)
            .map(|s| s.busy.as_slice())
            .unwrap_or(&[])
    }

    fn pads(&self, station: &str) -> u32 {
        self.stations.get(station).map(|s| s.pads).unwrap_or(1)
    }

    /// Max concurrent reservations within `[start, start + dur)`.
    fn peak_occupancy(&self, station: &str, start: u64, dur: u64) -> u32 {
        let end = start + dur;
        let busy = self.busy_intervals(station);
        let mut peak = 0u32;
        let mut points: Vec<u64> = vec![start];
        for &(s, _) in busy {
            if s > start && s < end {
                points.push(s);
            }
        }
        for &p in &points {
            let occ = busy.iter().filter(|&&(s, e)| s <= p && p < e).count() as u32;
            peak = peak.max(occ);
        }
        peak
    }

    fn fits(&self, station: &str, start: u64, dur: u64) -> bool {
        self.peak_occupancy(station, start, dur) < self.pads(station)
    }

    fn next_release_after(&self, station: &str, t: u64) -> Option<u64> {
        self.busy_intervals(station)
            .iter()
            .map(|&(_, e)| e)
            .filter(|&e| e > t)
            .min()
    }

    /// Earliest admission at or after `arrival` for a stay whose duration may
    /// depend on the admission time (voltage drains while hovering).
    /// `dur_of(t)` returns the stay length when admitted at `t`, or `None`
    /// when admission at `t` is impossible.
    pub fn earliest_admission(
        &self,
        station: &str,
        arrival: u64,
        mut dur_of: impl FnMut(u64) -> Option<u64>,
    ) -> Option<(u64, u64)> {
        let mut t = arrival;
        loop {
            let dur = dur_of(t)?;
            if self.fits(station, t, dur) {
                return Some((t, dur));
            }
            t = self.next_release_after(station, t)?;
        }
    }
}

/// One flown leg of an itinerary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub from: String,
    pub to: String,
    #[serde(rename = "depart_s", with = "crate::grid::ticks_as_seconds")]
    pub depart_ticks: u64,
    #[serde(rename = "arrive_s", with = "crate::grid::ticks_as_seconds")]
    pub arrive_ticks: u64,
    pub arrival_voltage: f64,
}

/// One recharge stop: the drone reaches the station at `start`, waits
/// `wait` for a pad, then charges `recharge` to the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub station: String,
    #[serde(rename = "start_s", with = "crate::grid::ticks_as_seconds")]
    pub start_ticks: u64,
    #[serde(rename = "wait_s", with = "crate::grid::ticks_as_seconds")]
    pub wait_ticks: u64,
    #[serde(rename = "recharge_s", with = "crate::grid::ticks_as_seconds")]
    pub recharge_ticks: u64,
}

/// A planned node sequence with per-leg times and voltages and recharge
/// stops. Times count from t = 0 at the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub initial_voltage: f64,
    pub legs: Vec<Leg>,
    pub stops: Vec<Stop>,
    /// Last arrival minus first departure.
    #[serde(rename = "total_s", with = "crate::grid::ticks_as_seconds")]
    pub total_ticks: u64,
}

impl Itinerary {
    /// Arrival time at the destination (ticks from t = 0, including any
    /// pre-departure charge at the source).
    pub fn arrival_ticks(&self) -> u64 {
        self.legs.last().map(|l| l.arrive_ticks).unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("itinerary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        serde_json::from_str(text).map_err(|e| PlanError::InvalidModel(e.to_string()))
    }
}

#[derive(Debug, Clone)]
enum Step {
    Start,
    Leg { from: usize, to: usize, depart: u64 },
    Charge { wait: u64, dur: u64 },
}

struct Label {
    ticks: u64,
    voltage: f64,
    node: usize,
    parent: usize,
    step: Step,
}

#[derive(PartialEq, Eq)]
struct HeapKey {
    ticks: u64,
    id_rank: usize,
    seq: usize,
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ticks
            .cmp(&other.ticks)
            .then(self.id_rank.cmp(&other.id_rank))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Compute a time-optimal itinerary from `source` to `dest` starting with
/// voltage `v0` at t = 0, respecting battery feasibility (noise-free voltage
/// never below the floor), recharge-to-threshold stops at stations, and pad
/// waits implied by `timeline`.
pub fn plan_route(
    network: &SkywayNetwork,
    source: &str,
    dest: &str,
    v0: f64,
    wind: WindField,
    model: &EnergyModel,
    timeline: &PadTimeline,
) -> Result<Itinerary, PlanError> {
    model
        .validate()
        .map_err(|e| PlanError::InvalidModel(e.to_string()))?;
    let source = network
        .node_index(source)
        .ok_or_else(|| PlanError::UnknownNode(source.to_string()))?;
    let dest = network
        .node_index(dest)
        .ok_or_else(|| PlanError::UnknownNode(dest.to_string()))?;
    if v0 > model.recharge_asymptote {
        return Err(PlanError::InvalidVoltage(v0));
    }
    if v0 < model.v_low {
        return Err(PlanError::Infeasible { explored: 0 });
    }

    // lexicographic rank of node ids, for the deterministic tie-break
    let mut ids: Vec<usize> = (0..network.len()).collect();
    ids.sort_by(|&a, &b| network.node(a).id.cmp(&network.node(b).id));
    let mut id_rank = vec![0usize; network.len()];
    for (rank, &node) in ids.iter().enumerate() {
        id_rank[node] = rank;
    }

    let mut arena: Vec<Label> = vec![Label {
        ticks: 0,
        voltage: v0,
        node: source,
        parent: usize::MAX,
        step: Step::Start,
    }];
    let mut frontier: Vec<Vec<(u64, f64)>> = vec![Vec::new(); network.len()];
    let mut heap: BinaryHeap<Reverse<(HeapKey, usize)>> = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Reverse((
        HeapKey {
            ticks: 0,
            id_rank: id_rank[source],
            seq,
        },
        0,
    )));
    let mut explored = 0usize;

    let dominated = |frontier: &[(u64, f64)], ticks: u64, voltage: f64| {
        frontier
            .iter()
            .any(|&(t, v)| t <= ticks && v >= voltage)
    };

    while let Some(Reverse((key, label_idx))) = heap.pop() {
        let (ticks, voltage, node) = {
            let l = &arena[label_idx];
            (l.ticks, l.voltage, l.node)
        };
        debug_assert_eq!(key.ticks, ticks);
        if dominated(&frontier[node], ticks, voltage) {
            continue;
        }
        frontier[node].retain(|&(t, v)| !(t >= ticks && v <= voltage));
        frontier[node].push((ticks, voltage));
        explored += 1;

        if node == dest {
            return Ok(reconstruct(network, &arena, label_idx, v0));
        }

        // fly one segment
        for (next, _, length) in network.neighbors(node) {
            let leg_heading = crate::network::heading(
                network.node(node).position,
                network.node(next).position,
            )
            .ok();
            let dur = grid::leg_ticks(length, model.cruise_speed);
            let rate = energy::drain_rate_leg(model, wind, leg_heading);
            let v_arr = voltage - dur as f64 * TICK_SECONDS * rate;
            if v_arr < model.v_low - 1e-12 {
                continue;
            }
            if dominated(&frontier[next], ticks + dur, v_arr) {
                continue;
            }
            arena.push(Label {
                ticks: ticks + dur,
                voltage: v_arr,
                node: next,
                parent: label_idx,
                step: Step::Leg {
                    from: node,
                    to: next,
                    depart: ticks,
                },
            });
            seq += 1;
            heap.push(Reverse((
                HeapKey {
                    ticks: ticks + dur,
                    id_rank: id_rank[next],
                    seq,
                },
                arena.len() - 1,
            )));
        }

        // recharge to threshold (stations only, only when below it)
        let spec = network.node(node);
        if spec.is_station() && voltage < model.v_full {
            let station_id = spec.id.as_str();
            let hover = model.base_drain * TICK_SECONDS;
            let admission = timeline.earliest_admission(station_id, ticks, |t| {
                let v_adm = voltage - (t - ticks) as f64 * hover;
                if v_adm < model.v_low - 1e-12 {
                    return None;
                }
                energy::recharge_ticks(model, v_adm).ok()
            });
            if let Some((admit, dur)) = admission {
                let v_adm = voltage - (admit - ticks) as f64 * hover;
                let v_end = energy::recharge_voltage_after(model, v_adm, dur);
                let done = admit + dur;
                if !dominated(&frontier[node], done, v_end) {
                    arena.push(Label {
                        ticks: done,
                        voltage: v_end,
                        node,
                        parent: label_idx,
                        step: Step::Charge {
                            wait: admit - ticks,
                            dur,
                        },
                    });
                    seq += 1;
                    heap.push(Reverse((
                        HeapKey {
                            ticks: done,
                            id_rank: id_rank[node],
                            seq,
                        },
                        arena.len() - 1,
                    )));
                }
            }
        }
    }

    Err(PlanError::Infeasible { explored })
}

fn reconstruct(
    network: &SkywayNetwork,
    arena: &[Label],
    mut idx: usize,
    v0: f64,
) -> Itinerary {
    let mut legs = Vec::new();
    let mut stops = Vec::new();
    while idx != usize::MAX {
        let label = &arena[idx];
        match label.step {
            Step::Start => {}
            Step::Leg { from, to, depart } => legs.push(Leg {
                from: network.node(from).id.clone(),
                to: network.node(to).id.clone(),
                depart_ticks: depart,
                arrive_ticks: label.ticks,
                arrival_voltage: label.voltage,
            }),
            Step::Charge { wait, dur } => stops.push(Stop {
                station: network.node(label.node).id.clone(),
                start_ticks: label.ticks - wait - dur,
                wait_ticks: wait,
                recharge_ticks: dur,
            }),
        }
        idx = label.parent;
    }
    legs.reverse();
    stops.reverse();
    let total_ticks = match (legs.first(), legs.last()) {
        (Some(first), Some(last)) => last.arrive_ticks - first.depart_ticks,
        _ => 0,
    };
    Itinerary {
        initial_voltage: v0,
        legs,
        stops,
        total_ticks,
    }
}

/// Plan a fleet sequentially in nearest-first priority order (ascending
/// distance from each source to its nearest station, ties by drone id).
/// Each itinerary commits its pad reservations to the shared timeline before
/// the next plans, so the result is feasible and wait-consistent, not
/// globally optimal. Returns itineraries in mission order plus the final
/// timeline.
pub fn plan_fleet(
    network: &SkywayNetwork,
    missions: &[Mission],
    wind: WindField,
    model: &EnergyModel,
) -> Result<(Vec<Itinerary>, PadTimeline), PlanError> {
    let mut order: Vec<usize> = (0..missions.len()).collect();
    let priority: Vec<(f64, &str)> = missions
        .iter()
        .map(|m| {
            let src = network
                .node_index(&m.source)
                .map(|i| network.node(i).position);
            let dist = match src {
                Some(pos) => network
                    .nearest_station(pos)
                    .ok()
                    .map(|s| distance(pos, network.node_by_id(s).unwrap().position))
                    .unwrap_or(f64::INFINITY),
                None => f64::INFINITY,
            };
            (dist, m.drone.as_str())
        })
        .collect();
    order.sort_by(|&a, &b| {
        priority[a]
            .0
            .total_cmp(&priority[b].0)
            .then_with(|| priority[a].1.cmp(priority[b].1))
    });

    let mut timeline = PadTimeline::for_network(network);
    let mut results: Vec<Option<Itinerary>> = vec![None; missions.len()];
    for &i in &order {
        let m = &missions[i];
        let itinerary = plan_route(
            network,
            &m.source,
            &m.destination,
            m.initial_voltage,
            wind,
            model,
            &timeline,
        )
        .map_err(|e| match e {
            PlanError::Infeasible { explored } => PlanError::MissionInfeasible {
                drone: m.drone.clone(),
                explored,
            },
            other => other,
        })?;
        for stop in &itinerary.stops {
            let admit = stop.start_ticks + stop.wait_ticks;
            timeline.reserve(&stop.station, admit, admit + stop.recharge_ticks)?;
        }
        results[i] = Some(itinerary);
    }
    Ok((results.into_iter().map(Option::unwrap).collect(), timeline))
}

/// A constraint violated by an itinerary; produced by [`validate_itinerary`].
#[derive(Debug, Error, PartialEq)]
pub enum Violation {
    #[error("leg {leg} references unknown node {node:?}")]
    UnknownNode { leg: usize, node: String },
    #[error("leg {leg} does not follow a network segment")]
    MissingSegment { leg: usize },
    #[error("leg {leg} is not contiguous with the itinerary so far")]
    NotContiguous { leg: usize },
    #[error("leg {leg} duration disagrees with length / cruise speed")]
    WrongDuration { leg: usize },
    #[error("voltage below v_low on leg {leg}: {voltage:.4} V")]
    VoltageBelowFloor { leg: usize, voltage: f64 },
    #[error("stated arrival voltage on leg {leg} is {stated:.4}, re-simulation gives {expected:.4}")]
    ArrivalVoltageMismatch { leg: usize, expected: f64, stated: f64 },
    #[error("stop {stop} is not at a station")]
    StopNotAStation { stop: usize },
    #[error("stop {stop} matches no visited node and time")]
    OrphanStop { stop: usize },
    #[error("voltage below v_low while waiting at stop {stop}: {voltage:.4} V")]
    StopVoltageBelowFloor { stop: usize, voltage: f64 },
    #[error("stop {stop} recharge duration disagrees with the recharge curve")]
    RechargeDurationMismatch { stop: usize },
    #[error("post-stop voltage below the departure threshold at stop {stop}: {voltage:.4} V")]
    PostStopVoltageBelowThreshold { stop: usize, voltage: f64 },
    #[error("pad capacity exceeded at station {station:?}")]
    PadCapacityExceeded { station: String },
    #[error("total time disagrees with first departure and last arrival")]
    TotalTimeMismatch,
}

/// Re-simulate an itinerary with noise-free energy and report the first
/// violated constraint, or `None` when every invariant holds. Violations are
/// data, not errors.
pub fn validate_itinerary(
    itinerary: &Itinerary,
    network: &SkywayNetwork,
    wind: WindField,
    model: &EnergyModel,
    timeline: &PadTimeline,
) -> Option<Violation> {
    let mut used = vec![false; itinerary.stops.len()];
    let mut v = itinerary.initial_voltage;
    let mut t = 0u64;
    let mut pos = match itinerary.legs.first() {
        Some(leg) => match network.node_index(&leg.from) {
            Some(idx) => idx,
            None => {
                return Some(Violation::UnknownNode {
                    leg: 0,
                    node: leg.from.clone(),
                })
            }
        },
        None => {
            if let Some(stop) = itinerary.stops.first() {
                let _ = stop;
                return Some(Violation::OrphanStop { stop: 0 });
            }
            if itinerary.total_ticks != 0 {
                return Some(Violation::TotalTimeMismatch);
            }
            return None;
        }
    };

    for (k, leg) in itinerary.legs.iter().enumerate() {
        // stops taken at the current node before departing
        loop {
            let next_stop = itinerary.stops.iter().enumerate().find(|(si, s)| {
                !used[*si] && s.station == network.node(pos).id && s.start_ticks == t
            });
            let Some((si, stop)) = next_stop else { break };
            used[si] = true;
            if !network.node(pos).is_station() {
                return Some(Violation::StopNotAStation { stop: si });
            }
            let v_adm = v - stop.wait_ticks as f64 * TICK_SECONDS * model.base_drain;
            if v_adm < model.v_low - 1e-9 {
                return Some(Violation::StopVoltageBelowFloor {
                    stop: si,
                    voltage: v_adm,
                });
            }
            match energy::recharge_ticks(model, v_adm) {
                Ok(dur) if dur == stop.recharge_ticks => {}
                _ => return Some(Violation::RechargeDurationMismatch { stop: si }),
            }
            v = energy::recharge_voltage_after(model, v_adm, stop.recharge_ticks);
            if v < model.v_full - 1e-9 {
                return Some(Violation::PostStopVoltageBelowThreshold {
                    stop: si,
                    voltage: v,
                });
            }
            t += stop.wait_ticks + stop.recharge_ticks;
        }

        let from = match network.node_index(&leg.from) {
            Some(idx) => idx,
            None => {
                return Some(Violation::UnknownNode {
                    leg: k,
                    node: leg.from.clone(),
                })
            }
        };
        let to = match network.node_index(&leg.to) {
            Some(idx) => idx,
            None => {
                return Some(Violation::UnknownNode {
                    leg: k,
                    node: leg.to.clone(),
                })
            }
        };
        if from != pos || leg.depart_ticks != t {
            return Some(Violation::NotContiguous { leg: k });
        }
        let length = network
            .neighbors(from)
            .filter(|&(other, _, _)| other == to)
            .map(|(_, _, len)| len)
            .fold(f64::INFINITY, f64::min);
        if !length.is_finite() {
            return Some(Violation::MissingSegment { leg: k });
        }
        let dur = grid::leg_ticks(length, model.cruise_speed);
        if leg.arrive_ticks != leg.depart_ticks + dur {
            return Some(Violation::WrongDuration { leg: k });
        }
        let leg_heading =
            crate::network::heading(network.node(from).position, network.node(to).position).ok();
        let rate = energy::drain_rate_leg(model, wind, leg_heading);
        v -= dur as f64 * TICK_SECONDS * rate;
        if v < model.v_low - 1e-9 {
            return Some(Violation::VoltageBelowFloor {
                leg: k,
                voltage: v,
            });
        }
        if (v - leg.arrival_voltage).abs() > 1e-6 {
            return Some(Violation::ArrivalVoltageMismatch {
                leg: k,
                expected: v,
                stated: leg.arrival_voltage,
            });
        }
        pos = to;
        t = leg.arrive_ticks;
    }

    if let Some(si) = used.iter().position(|&u| !u) {
        return Some(Violation::OrphanStop { stop: si });
    }
    let first = itinerary.legs.first().unwrap().depart_ticks;
    let last = itinerary.legs.last().unwrap().arrive_ticks;
    if itinerary.total_ticks != last - first {
        return Some(Violation::TotalTimeMismatch);
    }

    // pad capacity: the timeline's reservations plus this itinerary's stops
    let mut augmented = timeline.clone();
    for stop in &itinerary.stops {
        let admit = stop.start_ticks + stop.wait_ticks;
        if augmented
            .reserve(&stop.station, admit, admit + stop.recharge_ticks)
            .is_err()
        {
            // station absent from the timeline: capacity defaults checked below
            continue;
        }
    }
    for (station, entry) in &augmented.stations {
        for &(start, end) in &entry.busy {
            if augmented.peak_occupancy(station, start, end - start) > entry.pads {
                return Some(Violation::PadCapacityExceeded {
                    station: station.clone(),
                });
            }
        }
    }
    None
}
