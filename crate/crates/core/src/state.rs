//! Mutable automaton state for the three levels.

use std::fmt::Write as _;

use crate::scalar::Scalar;
use crate::topology::{LaneId, NetworkTopology};

/// Cell value of an empty road cell.
pub const EMPTY: i8 = -1;

pub type VehicleId = u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub lane: LaneId,
    pub cell: usize,
    pub speed: u8,
    /// Removal threshold on the current lane; only reached on exit lanes.
    pub destination: usize,
    /// Successor lane, drawn from the turn probabilities the first time the
    /// vehicle can reach the end of its lane. Cleared on transfer.
    pub next_lane: Option<LaneId>,
    /// Step during which the vehicle was placed on the network.
    pub entered_at: u64,
}

/// Level 1: road cells and the vehicles occupying them.
///
/// `cells[lane][k]` is `-1` when empty and the occupant's speed otherwise.
/// `vehicles` is kept sorted by `(lane, cell)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level1State {
    pub cells: Vec<Vec<i8>>,
    pub vehicles: Vec<Vehicle>,
    pub next_id: VehicleId,
}

impl Level1State {
    pub fn empty<S: Scalar>(topology: &NetworkTopology<S>) -> Self {
        Level1State {
            cells: topology.lanes().iter().map(|l| vec![EMPTY; l.length]).collect(),
            vehicles: Vec::new(),
            next_id: 0,
        }
    }

    /// Recomputes the cell array from the vehicle records alone.
    pub fn rebuild_cells<S: Scalar>(&self, topology: &NetworkTopology<S>) -> Vec<Vec<i8>> {
        let mut cells: Vec<Vec<i8>> = topology.lanes().iter().map(|l| vec![EMPTY; l.length]).collect();
        for v in &self.vehicles {
            if let Some(c) = cells.get_mut(v.lane).and_then(|lane| lane.get_mut(v.cell)) {
                *c = v.speed as i8;
            }
        }
        cells
    }

    /// Vehicles on one lane, in ascending cell order.
    pub fn lane_vehicles(&self, lane: LaneId) -> &[Vehicle] {
        let start = self.vehicles.partition_point(|v| v.lane < lane);
        let end = self.vehicles.partition_point(|v| v.lane <= lane);
        &self.vehicles[start..end]
    }

    pub fn is_occupied(&self, lane: LaneId, cell: usize) -> bool {
        self.cells[lane][cell] > EMPTY
    }

    /// Checks collision freedom, the speed bound, record ordering and that the
    /// cell array agrees with the vehicle records.
    pub fn check_invariants<S: Scalar>(&self, topology: &NetworkTopology<S>, v_max: u8) -> Result<(), String> {
        let mut seen = topology
            .lanes()
            .iter()
            .map(|l| vec![false; l.length])
            .collect::<Vec<_>>();
        for pair in self.vehicles.windows(2) {
            if (pair[0].lane, pair[0].cell) >= (pair[1].lane, pair[1].cell) {
                return Err(format!(
                    "vehicle records out of order or colliding: {:?} then {:?}",
                    pair[0], pair[1]
                ));
            }
        }
        for v in &self.vehicles {
            if v.speed > v_max {
                return Err(format!("vehicle {} exceeds v_max: {:?}", v.id, v));
            }
            let slot = seen
                .get_mut(v.lane)
                .and_then(|lane| lane.get_mut(v.cell))
                .ok_or_else(|| format!("vehicle {} off the network: {:?}", v.id, v))?;
            if *slot {
                return Err(format!("collision at lane {} cell {}", v.lane, v.cell));
            }
            *slot = true;
        }
        if self.rebuild_cells(topology) != self.cells {
            return Err("cell array disagrees with vehicle records".into());
        }
        Ok(())
    }

    /// Human-readable dump of one lane, used in invariant diagnostics.
    pub fn dump_lane(&self, lane: LaneId) -> String {
        let mut out = format!("lane {lane}: ");
        for &c in &self.cells[lane] {
            if c == EMPTY {
                out.push('.');
            } else {
                let _ = write!(out, "{c}");
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Signal {
    Red,
    Green,
}

impl Signal {
    /// Indication as stored in the lane cell: 1 for green, 0 for red.
    pub fn indication(self) -> u8 {
        match self {
            Signal::Green => 1,
            Signal::Red => 0,
        }
    }

    pub fn is_green(self) -> bool {
        self == Signal::Green
    }
}

/// Level 2 cell: occupancy, differential backlog and signal indication.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneState<S> {
    pub occupancy: usize,
    pub backlog: S,
    pub signal: Signal,
}

impl<S: Scalar> Default for LaneState<S> {
    fn default() -> Self {
        LaneState {
            occupancy: 0,
            backlog: S::zero(),
            signal: Signal::Red,
        }
    }
}

/// Level 3 cell: active phase and the number of steps since it was activated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntersectionState {
    pub phase: usize,
    pub elapsed: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Downstream, LaneDescriptor, Upstream};

    fn one_lane() -> NetworkTopology<f64> {
        NetworkTopology::new(
            vec![LaneDescriptor::new(4, Upstream::Entry, Downstream::Exit)],
            vec![],
            vec![],
        )
    }

    fn vehicle(id: u64, cell: usize, speed: u8) -> Vehicle {
        Vehicle {
            id,
            lane: 0,
            cell,
            speed,
            destination: 3,
            next_lane: None,
            entered_at: 0,
        }
    }

    #[test]
    fn consistent_state_passes() {
        let t = one_lane();
        let mut s = Level1State::empty(&t);
        s.vehicles = vec![vehicle(0, 1, 2), vehicle(1, 3, 0)];
        s.cells = s.rebuild_cells(&t);
        assert_eq!(s.cells[0], vec![-1, 2, -1, 0]);
        assert!(s.check_invariants(&t, 2).is_ok());
        assert_eq!(s.dump_lane(0), "lane 0: .2.0");
    }

    #[test]
    fn collisions_and_speeding_are_caught() {
        let t = one_lane();
        let mut s = Level1State::empty(&t);
        s.vehicles = vec![vehicle(0, 1, 1), vehicle(1, 1, 1)];
        s.cells = s.rebuild_cells(&t);
        assert!(s.check_invariants(&t, 2).is_err());

        s.vehicles = vec![vehicle(0, 1, 3)];
        s.cells = s.rebuild_cells(&t);
        assert!(s.check_invariants(&t, 2).unwrap_err().contains("v_max"));
    }

    #[test]
    fn stale_cells_are_caught() {
        let t = one_lane();
        let mut s = Level1State::empty(&t);
        s.vehicles = vec![vehicle(0, 2, 1)];
        assert!(s.check_invariants(&t, 2).is_err());
    }
}
