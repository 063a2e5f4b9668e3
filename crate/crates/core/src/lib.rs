//! Hierarchical cellular automaton for distributed traffic signal control.
//!
//! The automaton has three levels:
//!
//! 1. road cells holding vehicles ([`vehicle`]),
//! 2. lanes carrying occupancy, differential backlog and a signal indication ([`lane`]),
//! 3. intersections carrying the active phase and its age ([`signal`]).
//!
//! [`engine::Simulation`] advances all three levels once per time step, and
//! [`experiments`] replicates runs over seeds to compare control strategies.
//!
//! Everything that holds a real-valued quantity (turn probabilities, backlogs,
//! priorities, probabilities in the configuration) is generic over [`Scalar`].
//! The aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod lane;
pub mod rng;
pub mod scalar;
pub mod scenarios;
pub mod signal;
pub mod state;
pub mod topology;
pub mod vehicle;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Topology = topology::NetworkTopology<f64>;
pub type Lane = topology::LaneDescriptor<f64>;
pub type Config = config::SimConfig<f64>;
pub type Strategy = config::Strategy<f64>;
pub type LaneState = state::LaneState<f64>;
pub type Simulation = engine::Simulation<f64>;
pub type Scenario = scenarios::Scenario<f64>;
pub type Experiment = experiments::Experiment<f64>;

pub type Topology32 = topology::NetworkTopology<f32>;
pub type Config32 = config::SimConfig<f32>;
pub type Simulation32 = engine::Simulation<f32>;
pub type Scenario32 = scenarios::Scenario<f32>;
