//! Level-1 update: stochastic car-following with signals, and vehicle injection.
//!
//! Each step, every vehicle runs the same four operations against the
//! pre-step configuration:
//!
//! 1. accelerate by one cell/step up to `v_max`,
//! 2. brake to stay behind the vehicle ahead and, on red, short of the stop line,
//! 3. with probability `p` slow down by one,
//! 4. move.
//!
//! The intersection itself has no cells. A vehicle that reaches the end of its
//! lane on green continues directly onto a successor lane drawn from the turn
//! probabilities, using whatever movement it has left.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::state::{Level1State, Signal, Vehicle, EMPTY};
use crate::topology::{LaneId, NetworkTopology};

pub fn accelerate(v: u8, v_max: u8) -> u8 {
    v.saturating_add(1).min(v_max)
}

/// `gap` is the distance to the next vehicle ahead and `signal_distance` the
/// distance to the stop line, both in cells; `None` means nothing in range.
pub fn brake(v: u8, gap: Option<usize>, signal_distance: Option<usize>, signal: Signal) -> u8 {
    let mut limit = usize::from(v);
    if let Some(d) = gap {
        limit = limit.min(d.saturating_sub(1));
    }
    if signal == Signal::Red {
        if let Some(s) = signal_distance {
            limit = limit.min(s.saturating_sub(1));
        }
    }
    limit as u8
}

/// Draws exactly one uniform from `rng` regardless of `v` or `p`.
pub fn randomize<S: Scalar>(v: u8, p: S, rng: &mut RngStream) -> u8 {
    if rng.chance(p.as_f64()) {
        v.saturating_sub(1)
    } else {
        v
    }
}

/// Picks a successor lane by inverse-CDF sampling of the turn probabilities.
pub fn draw_successor<S: Scalar>(exits: &[(LaneId, S)], rng: &mut RngStream) -> LaneId {
    let u = rng.uniform();
    let mut acc = 0.0;
    for &(lane, w) in exits {
        acc += w.as_f64();
        if u < acc {
            return lane;
        }
    }
    // Rounding left the cumulative sum just under 1.
    exits
        .iter()
        .rev()
        .find(|(_, w)| *w > S::zero())
        .or(exits.last())
        .map(|(lane, _)| *lane)
        .expect("successor drawn for a lane without exits")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Advance {
    pub state: Level1State,
    /// Vehicles that left the network this step, with their last position.
    pub removed: Vec<Vehicle>,
}

/// First occupied cell of `lane` within `range` cells of its start,
/// ignoring `skip` (a vehicle looking ahead onto its own lane on a loop).
fn first_occupied(cells: &[i8], range: usize, skip: Option<usize>) -> Option<usize> {
    cells
        .iter()
        .take(range)
        .enumerate()
        .find(|&(k, &c)| c > EMPTY && Some(k) != skip)
        .map(|(k, _)| k)
}

fn invariant(step: u64, state: &Level1State, lane: LaneId, detail: String) -> Error {
    Error::Invariant {
        step,
        detail,
        dump: state.dump_lane(lane),
    }
}

/// Accelerates, brakes, randomizes and moves every vehicle simultaneously.
///
/// `signals` holds the indication at the end of each lane. Vehicles are
/// processed lane by lane in id order, front to back, which fixes both the
/// order of random draws and the priority of vehicles competing for the same
/// successor lane.
#[allow(clippy::too_many_arguments)]
pub fn advance_all<S: Scalar>(
    state: &Level1State,
    signals: &[Signal],
    topology: &NetworkTopology<S>,
    v_max: u8,
    p: S,
    step: u64,
    driving: &mut RngStream,
    routing: &mut RngStream,
) -> Result<Advance> {
    let lanes = topology.lanes();
    let vehicles = &state.vehicles;
    let lookahead = usize::from(v_max) + 1;

    // Decisions, all against the pre-step configuration.
    let mut plans: Vec<(u8, Option<LaneId>)> = vec![(0, None); vehicles.len()];
    let mut ordered = Vec::with_capacity(vehicles.len());
    let mut start = 0;
    while start < vehicles.len() {
        let lane_id = vehicles[start].lane;
        let end = start + vehicles[start..].partition_point(|v| v.lane == lane_id);
        ordered.extend((start..end).rev());
        start = end;
    }

    for &idx in &ordered {
        let vehicle = &vehicles[idx];
        let lane = &lanes[vehicle.lane];
        let k = vehicle.cell;
        let signal = if lane.is_exit() { Signal::Green } else { signals[vehicle.lane] };
        let mut next_lane = vehicle.next_lane;

        let v = accelerate(vehicle.speed, v_max);
        let leader = vehicles
            .get(idx + 1)
            .filter(|ahead| ahead.lane == vehicle.lane)
            .map(|ahead| ahead.cell);
        let gap = match leader {
            Some(cell) => Some(cell - k),
            None if lane.is_exit() => None,
            None if signal.is_green() && lane.length - k <= usize::from(v) => {
                let succ = *next_lane.get_or_insert_with(|| draw_successor(&lane.exits, routing));
                let skip = (succ == vehicle.lane).then_some(k);
                first_occupied(&state.cells[succ], lookahead, skip).map(|f| lane.length - k + f)
            }
            None => None,
        };
        let signal_distance = (!lane.is_exit()).then(|| lane.signal_cell - k);
        let v = brake(v, gap, signal_distance, signal);
        let v = randomize(v, p, driving);
        plans[idx] = (v, next_lane);
    }

    // Movement, same order.
    let mut cells: Vec<Vec<i8>> = lanes.iter().map(|l| vec![EMPTY; l.length]).collect();
    let mut moved = Vec::with_capacity(vehicles.len());
    let mut removed = Vec::new();
    // Lowest cell claimed on each lane by vehicles transferred this step.
    let mut claimed: Vec<Option<usize>> = vec![None; lanes.len()];

    for &idx in &ordered {
        let vehicle = &vehicles[idx];
        let lane = &lanes[vehicle.lane];
        let (v, next_lane) = plans[idx];
        let target = vehicle.cell + usize::from(v);
        let mut next = Vehicle {
            speed: v,
            next_lane,
            ..vehicle.clone()
        };

        if lane.is_exit() && target > vehicle.destination {
            next.cell = target;
            removed.push(next);
            continue;
        } else if target < lane.length {
            next.cell = target;
        } else {
            let succ_id = next_lane.ok_or_else(|| {
                invariant(
                    step,
                    state,
                    vehicle.lane,
                    format!("vehicle {} reached the stop line without a successor", vehicle.id),
                )
            })?;
            let succ = &lanes[succ_id];
            let residual = target - lane.length;
            if claimed[succ_id] == Some(0) {
                // Successor entrance already taken this step.
                next.cell = lane.length - 1;
                next.speed = (lane.length - 1 - vehicle.cell) as u8;
            } else {
                let limit = claimed[succ_id].map_or(succ.length - 1, |c| (c - 1).min(succ.length - 1));
                let entry = residual.min(limit);
                next.lane = succ_id;
                next.cell = entry;
                next.speed = (lane.length - vehicle.cell + entry) as u8;
                next.destination = succ.last_cell();
                next.next_lane = None;
                claimed[succ_id] = Some(claimed[succ_id].map_or(entry, |c| c.min(entry)));
            }
        }

        let slot = &mut cells[next.lane][next.cell];
        if *slot != EMPTY {
            return Err(invariant(
                step,
                state,
                next.lane,
                format!("collision at lane {} cell {} moving vehicle {}", next.lane, next.cell, next.id),
            ));
        }
        *slot = next.speed as i8;
        moved.push(next);
    }

    moved.sort_unstable_by_key(|v| (v.lane, v.cell));
    Ok(Advance {
        state: Level1State {
            cells,
            vehicles: moved,
            next_id: state.next_id,
        },
        removed,
    })
}

/// Arrivals that could not be placed yet, per entry point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArrivalQueue {
    pub pending: Vec<u64>,
}

impl ArrivalQueue {
    pub fn new(entries: usize) -> Self {
        ArrivalQueue {
            pending: vec![0; entries],
        }
    }

    pub fn total(&self) -> u64 {
        self.pending.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Injection {
    pub arrived: u64,
    pub injected: u64,
}

/// Generates arrivals at each entry point with the given probability and
/// places at most one waiting vehicle per entry, at speed 0, when its entry
/// cell is free. Arrivals that find the cell occupied wait in `queue`.
pub fn inject<S: Scalar>(
    state: &mut Level1State,
    queue: &mut ArrivalQueue,
    topology: &NetworkTopology<S>,
    intensities: &[S],
    step: u64,
    rng: &mut RngStream,
) -> Injection {
    let mut out = Injection::default();
    for (e, entry) in topology.entry_points().iter().enumerate() {
        if rng.chance(intensities[e].as_f64()) {
            queue.pending[e] += 1;
            out.arrived += 1;
        }
        if queue.pending[e] == 0 || state.is_occupied(entry.lane, entry.cell) {
            continue;
        }
        queue.pending[e] -= 1;
        out.injected += 1;
        let vehicle = Vehicle {
            id: state.next_id,
            lane: entry.lane,
            cell: entry.cell,
            speed: 0,
            destination: topology.lane(entry.lane).last_cell(),
            next_lane: None,
            entered_at: step,
        };
        state.next_id += 1;
        state.cells[entry.lane][entry.cell] = 0;
        let at = state
            .vehicles
            .partition_point(|v| (v.lane, v.cell) < (entry.lane, entry.cell));
        state.vehicles.insert(at, vehicle);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Downstream, EntryPoint, LaneDescriptor, Upstream};

    #[test]
    fn accelerate_examples() {
        assert_eq!(accelerate(1, 2), 2);
        assert_eq!(accelerate(2, 2), 2);
        assert_eq!(accelerate(0, 2), 1);
    }

    #[test]
    fn brake_examples() {
        assert_eq!(brake(2, Some(10), Some(3), Signal::Red), 2);
        assert_eq!(brake(2, Some(10), Some(2), Signal::Red), 1);
        assert_eq!(brake(2, Some(2), Some(5), Signal::Green), 1);
        assert_eq!(brake(2, None, Some(1), Signal::Red), 0);
        assert_eq!(brake(2, None, Some(1), Signal::Green), 2);
        assert_eq!(brake(2, Some(1), None, Signal::Green), 0);
    }

    #[test]
    fn randomize_examples() {
        let mut rng = RngStream::new(5, 1);
        for _ in 0..100 {
            assert_eq!(randomize(2, 0.0, &mut rng), 2);
            assert_eq!(randomize(0, 1.0, &mut rng), 0);
            assert_eq!(randomize(2, 1.0, &mut rng), 1);
        }
    }

    #[test]
    fn successor_draw_follows_weights() {
        let exits = vec![(4usize, 0.7), (5usize, 0.3)];
        let mut rng = RngStream::new(11, 2);
        let n = 20_000;
        let fours = (0..n).filter(|_| draw_successor(&exits, &mut rng) == 4).count();
        let share = fours as f64 / n as f64;
        // 0.7 +- 4 standard errors
        assert!((share - 0.7).abs() < 4.0 * (0.21f64 / n as f64).sqrt(), "{share}");
    }

    /// entry lane (len 10) -> intersection 0 -> exit lane (len 10)
    fn corridor() -> NetworkTopology<f64> {
        let lanes = vec![
            LaneDescriptor::new(10, Upstream::Entry, Downstream::Intersection(0)).with_exits(vec![(1, 1.0)]),
            LaneDescriptor::new(10, Upstream::Intersection(0), Downstream::Exit),
        ];
        NetworkTopology::derive(
            lanes,
            vec![vec![vec![0], vec![0]]],
            vec![EntryPoint { lane: 0, cell: 0 }],
            2,
        )
    }

    fn place(t: &NetworkTopology<f64>, at: &[(LaneId, usize, u8)]) -> Level1State {
        let mut s = Level1State::empty(t);
        for (id, &(lane, cell, speed)) in at.iter().enumerate() {
            s.vehicles.push(Vehicle {
                id: id as u64,
                lane,
                cell,
                speed,
                destination: t.lane(lane).last_cell(),
                next_lane: None,
                entered_at: 0,
            });
        }
        s.vehicles.sort_by_key(|v| (v.lane, v.cell));
        s.next_id = at.len() as u64;
        s.cells = s.rebuild_cells(t);
        s
    }

    fn advance(t: &NetworkTopology<f64>, s: &Level1State, signal: Signal) -> Advance {
        let mut d = RngStream::new(0, 1);
        let mut r = RngStream::new(0, 2);
        let signals = vec![signal, Signal::Green];
        advance_all(s, &signals, t, 2, 0.0, 1, &mut d, &mut r).unwrap()
    }

    #[test]
    fn free_flow_moves_at_full_speed() {
        let t = corridor();
        let s = place(&t, &[(0, 2, 2)]);
        let a = advance(&t, &s, Signal::Green);
        assert_eq!((a.state.vehicles[0].cell, a.state.vehicles[0].speed), (4, 2));
        assert!(a.state.check_invariants(&t, 2).is_ok());
    }

    #[test]
    fn red_signal_one_cell_ahead_stops_vehicle() {
        let t = corridor();
        for v in 0..=2 {
            let s = place(&t, &[(0, 9, v)]);
            let a = advance(&t, &s, Signal::Red);
            assert_eq!((a.state.vehicles[0].cell, a.state.vehicles[0].speed), (9, 0));
        }
    }

    #[test]
    fn follower_behind_stopped_leader_stays() {
        let t = corridor();
        let s = place(&t, &[(0, 5, 1), (0, 6, 0), (0, 9, 0)]);
        let a = advance(&t, &s, Signal::Red);
        let cells: Vec<_> = a.state.vehicles.iter().map(|v| (v.cell, v.speed)).collect();
        assert_eq!(cells, vec![(5, 0), (7, 1), (9, 0)]);
    }

    #[test]
    fn green_transfers_residual_movement() {
        let t = corridor();
        let s = place(&t, &[(0, 9, 2)]);
        let a = advance(&t, &s, Signal::Green);
        let v = &a.state.vehicles[0];
        assert_eq!((v.lane, v.cell, v.speed), (1, 1, 2));
        assert_eq!(v.destination, 9);
        assert_eq!(v.next_lane, None);
    }

    #[test]
    fn blocked_successor_holds_vehicle_at_stop_line() {
        let t = corridor();
        let s = place(&t, &[(0, 9, 1), (1, 0, 0)]);
        let a = advance(&t, &s, Signal::Green);
        let v = &a.state.vehicles[0];
        assert_eq!((v.lane, v.cell, v.speed), (0, 9, 0));
        // Leader entered the successor one cell ahead: follower can go one cell.
        let s = place(&t, &[(0, 8, 2), (1, 1, 0)]);
        let a = advance(&t, &s, Signal::Green);
        let v = &a.state.vehicles[0];
        assert_eq!((v.lane, v.cell, v.speed), (1, 0, 2));
    }

    #[test]
    fn vehicles_leave_past_destination() {
        let t = corridor();
        let s = place(&t, &[(1, 8, 2), (1, 3, 2)]);
        let a = advance(&t, &s, Signal::Green);
        assert_eq!(a.removed.len(), 1);
        assert_eq!(a.removed[0].id, 0);
        assert_eq!(a.state.vehicles.len(), 1);
    }

    #[test]
    fn injection_defers_when_entry_is_blocked() {
        let t = corridor();
        let mut s = place(&t, &[(0, 0, 0)]);
        let mut q = ArrivalQueue::new(1);
        let mut rng = RngStream::new(1, 0);
        let out = inject(&mut s, &mut q, &t, &[1.0], 3, &mut rng);
        assert_eq!(out, Injection { arrived: 1, injected: 0 });
        assert_eq!(q.total(), 1);

        let mut s = Level1State::empty(&t);
        let out = inject(&mut s, &mut q, &t, &[1.0], 3, &mut rng);
        assert_eq!(out, Injection { arrived: 1, injected: 1 });
        assert_eq!(q.total(), 1);
        assert_eq!(s.vehicles[0].entered_at, 3);
        assert!(s.check_invariants(&t, 2).is_ok());

        let before = s.clone();
        let out = inject(&mut s, &mut ArrivalQueue::new(1), &t, &[0.0], 4, &mut rng);
        assert_eq!(out, Injection::default());
        assert_eq!(s, before);
    }
}
