//! Level-2 update: lane occupancy, differential backlog and signal write-back.

use crate::scalar::Scalar;
use crate::state::{IntersectionState, LaneState, Level1State, Signal, EMPTY};
use crate::topology::{Downstream, LaneId, NetworkTopology};

/// Number of occupied road cells on `lane`.
pub fn compute_occupancy(lane: LaneId, level1: &Level1State) -> usize {
    level1.cells[lane].iter().filter(|&&c| c > EMPTY).count()
}

/// Turn-probability weighted difference between this lane's occupancy and
/// the occupancy of each successor lane.
pub fn compute_backlog<S: Scalar>(lane: LaneId, occupancies: &[usize], topology: &NetworkTopology<S>) -> S {
    let own = S::lit(occupancies[lane] as f64);
    topology
        .lane(lane)
        .exits
        .iter()
        .map(|&(succ, w)| w * (own - S::lit(occupancies[succ] as f64)))
        .sum()
}

/// Stage 2: occupancies first, then backlogs from the fresh occupancies.
/// Signal indications are left untouched.
pub fn update_lanes<S: Scalar>(level1: &Level1State, topology: &NetworkTopology<S>, lanes: &mut [LaneState<S>]) {
    let occupancies: Vec<usize> = (0..lanes.len()).map(|l| compute_occupancy(l, level1)).collect();
    for (id, state) in lanes.iter_mut().enumerate() {
        state.occupancy = occupancies[id];
        state.backlog = compute_backlog(id, &occupancies, topology);
    }
}

/// Green for the lanes of each intersection's active phase and for every
/// exit lane; red for all other inbound lanes.
pub fn apply_signal_indications<S: Scalar>(
    intersections: &[IntersectionState],
    topology: &NetworkTopology<S>,
) -> Vec<Signal> {
    let mut signals: Vec<Signal> = topology
        .lanes()
        .iter()
        .map(|l| match l.downstream {
            Downstream::Exit => Signal::Green,
            Downstream::Intersection(_) => Signal::Red,
        })
        .collect();
    for (node, state) in topology.intersections().iter().zip(intersections) {
        for &l in &node.phases[state.phase] {
            signals[l] = Signal::Green;
        }
    }
    signals
}
