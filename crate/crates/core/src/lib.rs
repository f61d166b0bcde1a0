//! Deterministic simulator, planner, and dataset toolkit for multi-drone
//! package delivery over skyway networks with shared recharging stations.
//!
//! The crate is organized around six pieces:
//!
//! * [`network`] — skyway graph, node geometry, distances, headings, shortest paths
//! * [`energy`] — voltage drain under wind, recharge curve, model calibration
//! * [`sim`] — discrete-event fleet simulation with pad contention on a 0.1 s grid
//! * [`planner`] — time-optimal single-drone itineraries and sequential fleet plans
//! * [`dataio`] — flight-log CSV schema, dataset layout, derived metrics
//! * [`cli`] — command implementations backing the `skyway` binary
//!
//! All simulation state advances on a fixed 0.1 s tick ([`grid::TICK_SECONDS`]);
//! every run is a pure function of its inputs and a single `u64` seed.

pub mod cli;
pub mod dataio;
pub mod energy;
pub mod grid;
pub mod network;
pub mod planner;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use energy::{CompassDir, EnergyModel, VoltageTrace, WindField};
pub use network::{NodeKind, NodeSpec, SegmentSpec, SkywayNetwork};
pub use sim::{Mission, MissionResult, Policy};
