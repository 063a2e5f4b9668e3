//! Benchmark networks and file-based configuration.
//!
//! Both builders use straight-through routing (turn probability 1 onto the
//! geometric continuation) and give each road an approach lane before its
//! first intersection and an exit lane after its last, all `block` cells long.

pub mod listing;
pub mod settings;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::{Downstream, EntryPoint, LaneDescriptor, LaneId, NetworkTopology, Upstream};

pub use settings::{load_config, ScenarioKind, Settings};

/// Cells between adjacent intersections: 300 m at 7.5 m per cell.
pub const DEFAULT_BLOCK_CELLS: usize = 40;
pub const DEFAULT_V_MAX: u8 = 2;
pub const DEFAULT_P: f64 = 0.2;
pub const DEFAULT_HORIZON: u64 = 3600;
pub const DEFAULT_SIDE_Q: f64 = 0.02;
pub const DEFAULT_GRID_ROADS: usize = 4;
pub const DEFAULT_ARTERIAL_INTERSECTIONS: usize = 4;
/// Coordination weights used when none is given.
pub const DEFAULT_GRID_ALPHA: f64 = 1.0;
pub const DEFAULT_ARTERIAL_ALPHA: f64 = 0.25;

/// Whether an entry point carries the main demand `q` or side-road demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    Main,
    Side,
}

/// A topology together with how demand is spread over its entry points.
#[derive(Clone, Debug)]
pub struct Scenario<S> {
    pub name: String,
    pub topology: Arc<NetworkTopology<S>>,
    pub entry_kinds: Vec<EntryKind>,
    pub side_q: S,
}

impl<S: Scalar> Scenario<S> {
    pub fn grid(roads: usize, block: usize, v_max: u8) -> Result<Self> {
        let topology = build_grid(roads, block, v_max)?;
        Ok(Self::uniform("grid", topology))
    }

    pub fn arterial(intersections: usize, block: usize, v_max: u8, side_q: S) -> Result<Self> {
        let topology = build_arterial(intersections, block, v_max)?;
        let mut entry_kinds = vec![EntryKind::Side; topology.entry_points().len()];
        entry_kinds[0] = EntryKind::Main;
        Ok(Scenario {
            name: "arterial".into(),
            topology: Arc::new(topology),
            entry_kinds,
            side_q,
        })
    }

    /// Every entry point receives the main intensity.
    pub fn uniform(name: &str, topology: NetworkTopology<S>) -> Self {
        Scenario {
            name: name.into(),
            entry_kinds: vec![EntryKind::Main; topology.entry_points().len()],
            topology: Arc::new(topology),
            side_q: S::zero(),
        }
    }

    pub fn intensities(&self, q: S) -> Vec<S> {
        self.entry_kinds
            .iter()
            .map(|kind| match kind {
                EntryKind::Main => q,
                EntryKind::Side => self.side_q,
            })
            .collect()
    }
}

fn check_sizes(count: usize, what: &str, block: usize, v_max: u8) -> Result<()> {
    if count < 1 {
        return Err(Error::config(format!("{what} must be at least 1")));
    }
    if block < 2 {
        return Err(Error::config(format!("block must be at least 2 cells, got {block}")));
    }
    if v_max < 1 {
        return Err(Error::config("v_max must be at least 1"));
    }
    Ok(())
}

/// Lanes of one straight road crossing `nodes` in order: an approach lane,
/// one lane between each consecutive pair and an exit lane. Returns the ids
/// of the new lanes.
fn push_road<S: Scalar>(lanes: &mut Vec<LaneDescriptor<S>>, nodes: &[usize], block: usize) -> Vec<LaneId> {
    let first = lanes.len();
    for j in 0..=nodes.len() {
        let upstream = match j {
            0 => Upstream::Entry,
            _ => Upstream::Intersection(nodes[j - 1]),
        };
        let downstream = match nodes.get(j) {
            Some(&i) => Downstream::Intersection(i),
            None => Downstream::Exit,
        };
        let mut lane = LaneDescriptor::new(block, upstream, downstream);
        if j < nodes.len() {
            lane.exits = vec![(first + j + 1, S::one())];
        }
        lanes.push(lane);
    }
    (first..lanes.len()).collect()
}

/// Square lattice of `roads` eastbound and `roads` northbound one-way roads.
///
/// Intersection `(row, col)` has id `row * roads + col`; phase 0 serves the
/// eastbound approach, phase 1 the northbound one. Entry points list the
/// eastbound roads bottom to top, then the northbound roads left to right.
pub fn build_grid<S: Scalar>(roads: usize, block: usize, v_max: u8) -> Result<NetworkTopology<S>> {
    check_sizes(roads, "roads per direction", block, v_max)?;
    let id = |row: usize, col: usize| row * roads + col;
    let mut lanes = Vec::new();
    let east: Vec<Vec<LaneId>> = (0..roads)
        .map(|row| {
            let nodes: Vec<usize> = (0..roads).map(|col| id(row, col)).collect();
            push_road(&mut lanes, &nodes, block)
        })
        .collect();
    let north: Vec<Vec<LaneId>> = (0..roads)
        .map(|col| {
            let nodes: Vec<usize> = (0..roads).map(|row| id(row, col)).collect();
            push_road(&mut lanes, &nodes, block)
        })
        .collect();

    let mut phases = vec![Vec::new(); roads * roads];
    for row in 0..roads {
        for col in 0..roads {
            phases[id(row, col)] = vec![vec![east[row][col]], vec![north[col][row]]];
        }
    }
    let entries = east
        .iter()
        .chain(north.iter())
        .map(|road| EntryPoint { lane: road[0], cell: 0 })
        .collect();
    Ok(NetworkTopology::derive(lanes, phases, entries, v_max))
}

/// One eastbound arterial crossing `intersections` junctions, each with a
/// northbound side road that starts and ends outside the network.
///
/// Phase 0 serves the arterial, phase 1 the side road. The first entry point
/// is the arterial; the rest are the side roads in order.
pub fn build_arterial<S: Scalar>(intersections: usize, block: usize, v_max: u8) -> Result<NetworkTopology<S>> {
    check_sizes(intersections, "intersections", block, v_max)?;
    let mut lanes = Vec::new();
    let nodes: Vec<usize> = (0..intersections).collect();
    let arterial = push_road(&mut lanes, &nodes, block);
    let sides: Vec<Vec<LaneId>> = nodes.iter().map(|&i| push_road(&mut lanes, &[i], block)).collect();
    let phases = nodes
        .iter()
        .map(|&i| vec![vec![arterial[i]], vec![sides[i][0]]])
        .collect();
    let entries = std::iter::once(arterial[0])
        .chain(sides.iter().map(|s| s[0]))
        .map(|lane| EntryPoint { lane, cell: 0 })
        .collect();
    Ok(NetworkTopology::derive(lanes, phases, entries, v_max))
}
