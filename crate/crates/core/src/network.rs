//! Skyway network graph: rooftop nodes (waypoints and recharging stations)
//! joined by bidirectional skyway segments, plus the geometric primitives
//! (distance, compass heading, nearest station, shortest path) every other
//! module builds on.
//!
//! Networks are immutable after construction and safe to share across
//! simulation workers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A position in the model frame, meters. `+y` is North, `+x` is East.
pub type Point = [f64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("duplicate node id {0:?}")]
    DuplicateNodeId(String),
    #[error("segment endpoint {0:?} is not a node")]
    UnknownEndpoint(String),
    #[error("segment {from:?}->{to:?} has non-positive length")]
    NonPositiveLength { from: String, to: String },
    #[error("segment {from:?}->{to:?} length {length} is below the straight-line distance {chord}")]
    LengthBelowChord {
        from: String,
        to: String,
        length: f64,
        chord: f64,
    },
    #[error("segment {0:?} connects a node to itself")]
    SelfLoop(String),
    #[error("station {0:?} has no recharging pads")]
    StationWithoutPads(String),
    #[error("waypoint {0:?} declares recharging pads")]
    WaypointWithPads(String),
    #[error("node {0:?} has a non-finite position component")]
    NonFinitePosition(String),
    #[error("network contains no recharging station")]
    NoStations,
    #[error("heading is undefined: horizontal projections coincide")]
    DegenerateHeading,
    #[error("invalid network file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Waypoint,
    Station,
}

/// One rooftop node of the skyway network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub position: Point,
    pub kind: NodeKind,
    /// Recharging pad count; 0 for waypoints, at least 1 for stations.
    pub pads: u32,
}

impl NodeSpec {
    pub fn waypoint(id: impl Into<String>, position: Point) -> Self {
        Self {
            id: id.into(),
            position,
            kind: NodeKind::Waypoint,
            pads: 0,
        }
    }

    pub fn station(id: impl Into<String>, position: Point, pads: u32) -> Self {
        Self {
            id: id.into(),
            position,
            kind: NodeKind::Station,
            pads,
        }
    }

    pub fn is_station(&self) -> bool {
        self.kind == NodeKind::Station
    }
}

/// A skyway segment between two nodes, by id. Length defaults to the
/// straight-line distance between the endpoints; an explicit override may
/// lengthen it (curved corridor) but never shorten it below the chord.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

impl SegmentSpec {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            length: None,
        }
    }

    pub fn with_length(from: impl Into<String>, to: impl Into<String>, length: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            length: Some(length),
        }
    }
}

/// A validated segment, endpoints resolved to node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

/// Validated, immutable skyway network. Segments are bidirectional.
#[derive(Debug, Clone)]
pub struct SkywayNetwork {
    nodes: Vec<NodeSpec>,
    segments: Vec<Segment>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    stations_sorted: Vec<usize>,
}

/// Euclidean distance between two points, meters.
pub fn distance(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Compass bearing of horizontal travel from `a` to `b`, degrees in
/// `[0, 360)`: 0 = North (+y), 90 = East (+x), clockwise positive.
/// Fails if the horizontal projections coincide.
pub fn heading(a: Point, b: Point) -> Result<f64, NetworkError> {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    if dx == 0.0 && dy == 0.0 {
        return Err(NetworkError::DegenerateHeading);
    }
    let deg = dx.atan2(dy).to_degrees();
    Ok(deg.rem_euclid(360.0))
}

/// Build a validated network from node and segment specifications.
pub fn build_network(
    nodes: Vec<NodeSpec>,
    segments: Vec<SegmentSpec>,
) -> Result<SkywayNetwork, NetworkError> {
    let mut index = HashMap::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        if node.position.iter().any(|c| !c.is_finite()) {
            return Err(NetworkError::NonFinitePosition(node.id.clone()));
        }
        match node.kind {
            NodeKind::Station if node.pads == 0 => {
                return Err(NetworkError::StationWithoutPads(node.id.clone()))
            }
            NodeKind::Waypoint if node.pads != 0 => {
                return Err(NetworkError::WaypointWithPads(node.id.clone()))
            }
            _ => {}
        }
        if index.insert(node.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateNodeId(node.id.clone()));
        }
    }

    let mut resolved = Vec::with_capacity(segments.len());
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for spec in &segments {
        let from = *index
            .get(&spec.from)
            .ok_or_else(|| NetworkError::UnknownEndpoint(spec.from.clone()))?;
        let to = *index
            .get(&spec.to)
            .ok_or_else(|| NetworkError::UnknownEndpoint(spec.to.clone()))?;
        if from == to {
            return Err(NetworkError::SelfLoop(spec.from.clone()));
        }
        let chord = distance(nodes[from].position, nodes[to].position);
        let length = spec.length.unwrap_or(chord);
        if !(length > 0.0) || !length.is_finite() {
            return Err(NetworkError::NonPositiveLength {
                from: spec.from.clone(),
                to: spec.to.clone(),
            });
        }
        // tolerance absorbs the round trip through a serialized override
        if length < chord - 1e-9 {
            return Err(NetworkError::LengthBelowChord {
                from: spec.from.clone(),
                to: spec.to.clone(),
                length,
                chord,
            });
        }
        let seg_idx = resolved.len();
        resolved.push(Segment { from, to, length });
        adjacency[from].push(seg_idx);
        adjacency[to].push(seg_idx);
    }

    let mut stations_sorted: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].is_station()).collect();
    stations_sorted.sort_by(|&a, &b| nodes[a].id.cmp(&nodes[b].id));

    Ok(SkywayNetwork {
        nodes,
        segments: resolved,
        index,
        adjacency,
        stations_sorted,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    nodes: Vec<NodeEntry>,
    segments: Vec<SegmentEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: String,
    x: f64,
    y: f64,
    z: f64,
    kind: NodeKind,
    #[serde(default)]
    pads: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentEntry {
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
}

impl SkywayNetwork {
    /// Parse a network JSON document (top-level keys `nodes` and `segments`;
    /// unknown keys are rejected).
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| NetworkError::File(e.to_string()))?;
        let nodes = file
            .nodes
            .into_iter()
            .map(|n| NodeSpec {
                id: n.id,
                position: [n.x, n.y, n.z],
                kind: n.kind,
                pads: n.pads,
            })
            .collect();
        let segments = file
            .segments
            .into_iter()
            .map(|s| SegmentSpec {
                from: s.from,
                to: s.to,
                length: s.length,
            })
            .collect();
        build_network(nodes, segments)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id.clone(),
                    x: n.position[0],
                    y: n.position[1],
                    z: n.position[2],
                    kind: n.kind,
                    pads: n.pads,
                })
                .collect(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentEntry {
                    from: self.nodes[s.from].id.clone(),
                    to: self.nodes[s.to].id.clone(),
                    length: Some(s.length),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, idx: usize) -> &NodeSpec {
        &self.nodes[idx]
    }

    pub fn node_by_id(&self, id: &str) -> Option<&NodeSpec> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    /// Station node indices, ordered by node id.
    pub fn stations(&self) -> &[usize] {
        &self.stations_sorted
    }

    /// Neighbors of `node`: (other endpoint, segment index, length).
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency[node].iter().map(move |&seg_idx| {
            let seg = &self.segments[seg_idx];
            let other = if seg.from == node { seg.to } else { seg.from };
            (other, seg_idx, seg.length)
        })
    }

    /// Whether a segment joins `a` and `b` in either direction.
    pub fn has_segment(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).any(|(other, _, _)| other == b)
    }

    /// Id of the station nearest to `pos`; ties break to the
    /// lexicographically smallest station id.
    pub fn nearest_station(&self, pos: Point) -> Result<&str, NetworkError> {
        self.stations_sorted
            .iter()
            .map(|&i| (distance(pos, self.nodes[i].position), &self.nodes[i].id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
            .map(|(_, id)| id.as_str())
            .ok_or(NetworkError::NoStations)
    }

    /// Shortest segment path from `from` to `to` by total length.
    /// Returns the node index sequence (including endpoints) and the total
    /// length, or `None` if unreachable. Ties break deterministically by
    /// node id along the frontier.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<(Vec<usize>, f64)> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        #[derive(PartialEq)]
        struct Entry(f64, String, usize);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0
                    .total_cmp(&other.0)
                    .then_with(|| self.1.cmp(&other.1))
            }
        }

        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut prev = vec![usize::MAX; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(Reverse(Entry(0.0, self.nodes[from].id.clone(), from)));

        while let Some(Reverse(Entry(d, _, node))) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            if node == to {
                break;
            }
            for (next, _, length) in self.neighbors(node) {
                let nd = d + length;
                if nd < dist[next] {
                    dist[next] = nd;
                    prev[next] = node;
                    heap.push(Reverse(Entry(nd, self.nodes[next].id.clone(), next)));
                }
            }
        }

        if dist[to].is_infinite() {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some((path, dist[to]))
    }
}
