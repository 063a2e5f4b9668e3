//! Level-3 update: phase selection at each intersection.
//!
//! The score of a phase is its back-pressure priority (sum of the inbound
//! backlogs it serves) plus `alpha` times a coordination priority that grows
//! with how long an upstream neighbor has been releasing vehicles toward it.

use crate::config::Strategy;
use crate::scalar::Scalar;
use crate::state::IntersectionState;
use crate::topology::{IntersectionId, LaneId, NetworkTopology};

/// Back-pressure priority: total backlog of the lanes the phase serves.
pub fn phase_pressure<S: Scalar>(phase: &[LaneId], backlogs: &[S]) -> S {
    phase.iter().map(|&l| backlogs[l]).sum()
}

/// `tau - travel_time` when the neighbor's active phase feeds `own_phase`
/// at `intersection`, otherwise `-inf`. Also `-inf` if `neighbor` is not an
/// upstream neighbor at all.
pub fn coordination_f<S: Scalar>(
    intersection: IntersectionId,
    neighbor: IntersectionId,
    neighbor_state: IntersectionState,
    own_phase: usize,
    topology: &NetworkTopology<S>,
) -> S {
    let node = topology.intersection(intersection);
    match node.travel_time(neighbor) {
        Some(time) if node.compatible(neighbor, neighbor_state.phase, own_phase) => {
            S::lit(f64::from(neighbor_state.elapsed) - f64::from(time))
        }
        _ => S::neg_infinity(),
    }
}

/// Best coordination value over all upstream neighbors, floored at zero so
/// that an absent or incompatible neighborhood never vetoes a phase.
pub fn coordination_priority<S: Scalar>(
    intersection: IntersectionId,
    own_phase: usize,
    states: &[IntersectionState],
    topology: &NetworkTopology<S>,
) -> S {
    topology
        .intersection(intersection)
        .neighbors
        .iter()
        .map(|&(n, _)| coordination_f(intersection, n, states[n], own_phase, topology))
        .fold(S::zero(), S::max)
}

/// Unfloored maximum, `-inf` for an empty neighborhood.
pub fn coordination_priority_raw<S: Scalar>(
    intersection: IntersectionId,
    own_phase: usize,
    states: &[IntersectionState],
    topology: &NetworkTopology<S>,
) -> S {
    topology
        .intersection(intersection)
        .neighbors
        .iter()
        .map(|&(n, _)| coordination_f(intersection, n, states[n], own_phase, topology))
        .fold(S::neg_infinity(), S::max)
}

/// Index of the best score. Ties go to `incumbent` if it is among the
/// maximizers, then to the lowest index.
pub fn argmax_with_incumbent<S: Scalar>(scores: &[S], incumbent: usize) -> usize {
    let best = scores.iter().copied().fold(S::neg_infinity(), S::max);
    if scores.get(incumbent) == Some(&best) {
        return incumbent;
    }
    scores.iter().position(|&s| s == best).unwrap_or(incumbent)
}

/// Advances the phase age or resets it when the phase changed.
pub fn transition(current: IntersectionState, phase: usize) -> IntersectionState {
    if phase == current.phase {
        IntersectionState {
            phase,
            elapsed: current.elapsed.saturating_add(1),
        }
    } else {
        IntersectionState { phase, elapsed: 0 }
    }
}

/// Picks the phase maximizing `pressure + alpha * coordination`.
///
/// `neighbor_states` is the previous step's state of every intersection.
pub fn select_phase<S: Scalar>(
    intersection: IntersectionId,
    current: IntersectionState,
    backlogs: &[S],
    neighbor_states: &[IntersectionState],
    alpha: S,
    topology: &NetworkTopology<S>,
) -> IntersectionState {
    let scores: Vec<S> = topology
        .intersection(intersection)
        .phases
        .iter()
        .enumerate()
        .map(|(p, lanes)| {
            let pressure = phase_pressure(lanes, backlogs);
            if alpha == S::zero() {
                pressure
            } else {
                pressure + alpha * coordination_priority(intersection, p, neighbor_states, topology)
            }
        })
        .collect();
    transition(current, argmax_with_incumbent(&scores, current.phase))
}

/// Per-step phase decisions for every intersection under one strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller<S> {
    strategy: Strategy<S>,
    min_green: u32,
}

impl<S: Scalar> Controller<S> {
    pub fn new(strategy: Strategy<S>, min_green: u32) -> Self {
        Controller { strategy, min_green }
    }

    pub fn strategy(&self) -> &Strategy<S> {
        &self.strategy
    }

    /// Stage 3 for all intersections against one snapshot of their states.
    /// `time` is the number of completed steps including the current one.
    pub fn update(
        &self,
        previous: &[IntersectionState],
        backlogs: &[S],
        time: u64,
        topology: &NetworkTopology<S>,
    ) -> Vec<IntersectionState> {
        previous
            .iter()
            .enumerate()
            .map(|(i, &current)| self.decide(i, current, previous, backlogs, time, topology))
            .collect()
    }

    fn decide(
        &self,
        intersection: IntersectionId,
        current: IntersectionState,
        previous: &[IntersectionState],
        backlogs: &[S],
        time: u64,
        topology: &NetworkTopology<S>,
    ) -> IntersectionState {
        match &self.strategy {
            Strategy::FixedTime(plan) => transition(current, plan.phase_at(time)),
            _ if current.elapsed.saturating_add(1) < self.min_green => transition(current, current.phase),
            Strategy::Backpressure => {
                select_phase(intersection, current, backlogs, previous, S::zero(), topology)
            }
            Strategy::Hca { alpha } => select_phase(intersection, current, backlogs, previous, *alpha, topology),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FixedTimePlan;
    use crate::topology::{Downstream, EntryPoint, LaneDescriptor, Upstream};

    /// Intersection 0 feeds intersection 1 along lanes 0 -> 1 -> 2.
    /// Lanes 3 and 5 are side approaches into 0 and 1.
    fn pair() -> NetworkTopology<f64> {
        let lanes = vec![
            LaneDescriptor::new(40, Upstream::Entry, Downstream::Intersection(0)).with_exits(vec![(1, 1.0)]),
            LaneDescriptor::new(40, Upstream::Intersection(0), Downstream::Intersection(1))
                .with_exits(vec![(2, 1.0)]),
            LaneDescriptor::new(40, Upstream::Intersection(1), Downstream::Exit),
            LaneDescriptor::new(40, Upstream::Entry, Downstream::Intersection(0)).with_exits(vec![(4, 1.0)]),
            LaneDescriptor::new(40, Upstream::Intersection(0), Downstream::Exit),
            LaneDescriptor::new(40, Upstream::Entry, Downstream::Intersection(1)).with_exits(vec![(6, 1.0)]),
            LaneDescriptor::new(40, Upstream::Intersection(1), Downstream::Exit),
        ];
        NetworkTopology::derive(
            lanes,
            vec![vec![vec![0], vec![3]], vec![vec![1], vec![5]]],
            vec![EntryPoint { lane: 0, cell: 0 }],
            2,
        )
    }

    fn st(phase: usize, elapsed: u32) -> IntersectionState {
        IntersectionState { phase, elapsed }
    }

    #[test]
    fn pressure_examples() {
        let backlogs = [5.0, 4.0, -1.0, 0.0];
        assert_eq!(phase_pressure(&[0], &backlogs), 5.0);
        assert_eq!(phase_pressure(&[1, 2], &backlogs), 3.0);
        assert_eq!(phase_pressure(&[0, 1], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn coordination_f_examples() {
        let t = pair();
        assert_eq!(coordination_f(1, 0, st(0, 25), 0, &t), 5.0);
        assert_eq!(coordination_f(1, 0, st(0, 10), 0, &t), -10.0);
        assert_eq!(coordination_f(1, 0, st(1, 25), 0, &t), f64::NEG_INFINITY);
        assert_eq!(coordination_f(1, 0, st(0, 25), 1, &t), f64::NEG_INFINITY);
    }

    #[test]
    fn coordination_priority_is_floored() {
        let t = pair();
        assert_eq!(coordination_priority(1, 0, &[st(0, 25), st(0, 0)], &t), 5.0);
        assert_eq!(coordination_priority_raw(1, 1, &[st(0, 25), st(0, 0)], &t), f64::NEG_INFINITY);
        assert_eq!(coordination_priority(1, 1, &[st(0, 25), st(0, 0)], &t), 0.0);
        // Boundary intersection without upstream neighbors.
        assert_eq!(coordination_priority(0, 0, &[st(0, 99), st(0, 99)], &t), 0.0);
        // Neighbor still en route: raw value negative, floored to zero.
        assert_eq!(coordination_priority(1, 0, &[st(0, 3), st(0, 0)], &t), 0.0);
    }

    #[test]
    fn f_is_positive_exactly_when_tau_exceeds_travel_time() {
        let t = pair();
        for tau in 0..60 {
            let f = coordination_f(1, 0, st(0, tau), 0, &t);
            assert_eq!(f > 0.0, tau > 20, "tau={tau}");
        }
    }

    #[test]
    fn argmax_tie_breaks() {
        assert_eq!(argmax_with_incumbent(&[3.0, 7.0], 0), 1);
        assert_eq!(argmax_with_incumbent(&[7.0, 7.0], 1), 1);
        assert_eq!(argmax_with_incumbent(&[7.0, 7.0, 1.0], 2), 0);
        assert_eq!(argmax_with_incumbent(&[1.0, 7.0, 7.0], 0), 1);
    }

    #[test]
    fn select_phase_examples() {
        let t = pair();
        let prev = [st(0, 0), st(0, 4)];
        // alpha = 0, pressures (3, 7) -> phase 1.
        let mut backlogs = vec![0.0; 7];
        backlogs[1] = 3.0;
        backlogs[5] = 7.0;
        assert_eq!(select_phase(1, st(0, 4), &backlogs, &prev, 0.0, &t), st(1, 0));

        // alpha = 1, coordination (10, 0) -> phase 0 since 3 + 10 > 7.
        let prev = [st(0, 30), st(0, 4)];
        assert_eq!(select_phase(1, st(0, 4), &backlogs, &prev, 1.0, &t), st(0, 5));

        // Exact tie keeps the incumbent and ages it.
        backlogs[1] = 7.0;
        assert_eq!(select_phase(1, st(1, 2), &backlogs, &prev, 0.0, &t), st(1, 3));
    }

    #[test]
    fn neighbor_age_flips_the_decision_only_with_alpha() {
        let t = pair();
        let mut backlogs = vec![0.0; 7];
        backlogs[1] = 2.0;
        backlogs[5] = 6.0;
        let prev = [st(0, 40), st(1, 0)];
        assert_eq!(select_phase(1, st(1, 0), &backlogs, &prev, 0.0, &t).phase, 1);
        assert_eq!(select_phase(1, st(1, 0), &backlogs, &prev, 1.0, &t).phase, 0);
        // The same neighbor running an incompatible phase changes nothing.
        let prev = [st(1, 40), st(1, 0)];
        assert_eq!(select_phase(1, st(1, 0), &backlogs, &prev, 1.0, &t).phase, 1);
    }

    #[test]
    fn controller_strategies() {
        let t = pair();
        let backlogs = vec![0.0, 1.0, 0.0, 0.0, 0.0, 9.0, 0.0];
        let prev = [st(0, 0), st(0, 0)];
        let bp = Controller::new(Strategy::Backpressure, 0).update(&prev, &backlogs, 1, &t);
        let hca0 = Controller::new(Strategy::Hca { alpha: 0.0 }, 0).update(&prev, &backlogs, 1, &t);
        assert_eq!(bp, hca0);
        assert_eq!(bp, vec![st(0, 1), st(1, 0)]);

        let held = Controller::new(Strategy::Backpressure, 5).update(&prev, &backlogs, 1, &t);
        assert_eq!(held, vec![st(0, 1), st(0, 1)]);

        let fixed = Controller::new(Strategy::FixedTime(FixedTimePlan { splits: vec![30, 30] }), 0);
        let mut states = vec![st(0, 0), st(0, 0)];
        for time in 1..=120u64 {
            states = fixed.update(&states, &backlogs, time, &t);
            let expected = if time % 60 < 30 { 0 } else { 1 };
            assert_eq!(states[0].phase, expected, "time {time}");
            assert_eq!(states[0].elapsed as u64, time % 30, "time {time}");
        }
    }
}
