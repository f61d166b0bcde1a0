//! Built-in testbed-scale scenarios for the 70-run matrix: three drones
//! (E3, E5, E7), five path sets, and one- or two-station network layouts on
//! a roughly 1 m x 1 m model city footprint.
//!
//! The two-station layout is the one-station layout plus an extra station,
//! so makespans of the two configurations are directly comparable per path
//! set. Sources are placed so per-station distances are strictly ordered and
//! the two-station assignment always splits across both stations.

use crate::energy::WindField;
use crate::network::{build_network, NodeSpec, Point, SegmentSpec, SkywayNetwork};
use crate::sim::{Mission, RunSpec};

pub const PAPER_DRONES: [&str; 3] = ["E3", "E5", "E7"];

/// Initial voltages per drone; below the 4.15 V threshold so every mission
/// includes a recharge stop, with ample margin above the 3.2 V floor.
pub const PAPER_VOLTAGES: [f64; 3] = [4.02, 3.98, 3.94];

const CRUISE_Z: f64 = 0.5;

fn station_positions(stations: u8) -> Vec<(&'static str, Point)> {
    let mut v = vec![("S1", [0.60, 0.30, CRUISE_Z])];
    if stations == 2 {
        v.push(("S2", [0.00, 0.50, CRUISE_Z]));
    }
    v
}

fn source_position(drone: usize, path_set: u8) -> Point {
    let t = (path_set - 1) as f64;
    match drone {
        0 => [0.45 - 0.02 * t, 0.10 + 0.02 * t, CRUISE_Z],
        1 => [0.85, 0.55 - 0.03 * t, CRUISE_Z],
        _ => [0.10 + 0.02 * t, 0.85, CRUISE_Z],
    }
}

fn dest_position(drone: usize, path_set: u8) -> Point {
    let t = (path_set - 1) as f64;
    match drone {
        0 => [0.95, 0.70 + 0.02 * t, CRUISE_Z],
        1 => [0.20 + 0.02 * t, 0.05, CRUISE_Z],
        _ => [0.55 + 0.02 * t, 0.95, CRUISE_Z],
    }
}

/// Build the network for one station configuration and path set. Every
/// source and destination connects directly to every station.
pub fn paper_network(stations: u8, path_set: u8) -> SkywayNetwork {
    assert!((1..=2).contains(&stations), "stations must be 1 or 2");
    assert!((1..=5).contains(&path_set), "path_set must be in 1..=5");
    let mut nodes = Vec::new();
    let mut segments = Vec::new();
    for (i, drone) in PAPER_DRONES.iter().enumerate() {
        nodes.push(NodeSpec::waypoint(format!("src-{drone}"), source_position(i, path_set)));
        nodes.push(NodeSpec::waypoint(format!("dst-{drone}"), dest_position(i, path_set)));
    }
    for (id, pos) in station_positions(stations) {
        nodes.push(NodeSpec::station(id, pos, 1));
        for drone in PAPER_DRONES {
            segments.push(SegmentSpec::new(format!("src-{drone}"), id));
            segments.push(SegmentSpec::new(id, format!("dst-{drone}")));
        }
    }
    build_network(nodes, segments).expect("generated scenario network is valid")
}

/// Missions for the three drones: unique source to unique destination.
pub fn paper_missions() -> Vec<Mission> {
    PAPER_DRONES
        .iter()
        .zip(PAPER_VOLTAGES)
        .map(|(drone, v0)| Mission {
            drone: (*drone).to_string(),
            source: format!("src-{drone}"),
            destination: format!("dst-{drone}"),
            initial_voltage: v0,
        })
        .collect()
}

/// Materialize one matrix entry as (network, missions, wind).
pub fn build_run(spec: &RunSpec) -> (SkywayNetwork, Vec<Mission>, WindField) {
    (
        paper_network(spec.stations, spec.path_set),
        paper_missions(),
        spec.wind(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::distance;
    use crate::sim::assign_nearest_first;

    #[test]
    fn layouts_are_distinct_and_strictly_ordered() {
        for stations in 1..=2u8 {
            for path_set in 1..=5u8 {
                let net = paper_network(stations, path_set);
                assert_eq!(net.len(), 6 + stations as usize);
                // all node positions pairwise distinct
                for a in net.nodes() {
                    for b in net.nodes() {
                        if a.id != b.id {
                            assert!(
                                distance(a.position, b.position) > 1e-3,
                                "{} and {} coincide in {stations}-station path {path_set}",
                                a.id,
                                b.id
                            );
                        }
                    }
                }
                // per-station distances strictly ordered (no arrival ties)
                let missions = paper_missions();
                let drones: Vec<(String, crate::network::Point)> = missions
                    .iter()
                    .map(|m| {
                        let idx = net.node_index(&m.source).unwrap();
                        (m.drone.clone(), net.node(idx).position)
                    })
                    .collect();
                let plan = assign_nearest_first(&drones, &net).unwrap();
                let mut dist_by_station: std::collections::HashMap<&str, Vec<f64>> =
                    std::collections::HashMap::new();
                for (drone, station) in &plan {
                    let src = drones.iter().find(|(d, _)| d == drone).unwrap().1;
                    let spos = net.node_by_id(station).unwrap().position;
                    dist_by_station
                        .entry(station.as_str())
                        .or_default()
                        .push(distance(src, spos));
                }
                for (station, dists) in dist_by_station {
                    for pair in dists.windows(2) {
                        assert!(
                            pair[1] > pair[0] + 1e-6,
                            "distance tie at {station}, path {path_set}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn two_station_assignment_splits() {
        for path_set in 1..=5u8 {
            let net = paper_network(2, path_set);
            let missions = paper_missions();
            let drones: Vec<(String, crate::network::Point)> = missions
                .iter()
                .map(|m| {
                    let idx = net.node_index(&m.source).unwrap();
                    (m.drone.clone(), net.node(idx).position)
                })
                .collect();
            let plan = assign_nearest_first(&drones, &net).unwrap();
            let map: std::collections::HashMap<&str, &str> = plan
                .iter()
                .map(|(d, s)| (d.as_str(), s.as_str()))
                .collect();
            assert_eq!(map["E3"], "S1");
            assert_eq!(map["E5"], "S1");
            assert_eq!(map["E7"], "S2");
        }
    }
}
