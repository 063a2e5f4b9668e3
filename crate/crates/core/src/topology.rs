//! Static network description shared by all three automaton levels.
//!
//! A [`NetworkTopology`] is built once and never mutated. Lanes and
//! intersections are addressed by their index in the respective list.

use std::collections::BTreeSet;
use std::fmt;

use crate::scalar::Scalar;

pub type LaneId = usize;
pub type IntersectionId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Upstream {
    Entry,
    Intersection(IntersectionId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Downstream {
    Exit,
    Intersection(IntersectionId),
}

impl Downstream {
    pub fn intersection(self) -> Option<IntersectionId> {
        match self {
            Downstream::Intersection(i) => Some(i),
            Downstream::Exit => None,
        }
    }
}

/// One lane, i.e. one level-2 cell together with its level-1 road cells.
#[derive(Clone, Debug, PartialEq)]
pub struct LaneDescriptor<S> {
    /// Number of road cells.
    pub length: usize,
    pub upstream: Upstream,
    pub downstream: Downstream,
    /// Successor lanes with turn probabilities. Empty only for exit lanes.
    pub exits: Vec<(LaneId, S)>,
    /// Position of the stop line. The signal sits just past the last cell,
    /// so this equals `length`.
    pub signal_cell: usize,
}

impl<S: Scalar> LaneDescriptor<S> {
    pub fn new(length: usize, upstream: Upstream, downstream: Downstream) -> Self {
        LaneDescriptor {
            length,
            upstream,
            downstream,
            exits: Vec::new(),
            signal_cell: length,
        }
    }

    pub fn with_exits(mut self, exits: Vec<(LaneId, S)>) -> Self {
        self.exits = exits;
        self
    }

    /// Last drivable cell; vehicles on exit lanes leave once past it.
    pub fn last_cell(&self) -> usize {
        self.length - 1
    }

    pub fn is_exit(&self) -> bool {
        self.downstream == Downstream::Exit
    }
}

/// Pairs `(neighbor phase, own phase)` such that vehicles released by the
/// neighbor under its phase meet green here under the own phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Compatibility {
    pub neighbor: IntersectionId,
    pub neighbor_phase: usize,
    pub phase: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionDescriptor {
    pub inbound_lanes: Vec<LaneId>,
    /// Each phase is the set of inbound lanes receiving green.
    pub phases: Vec<Vec<LaneId>>,
    /// Upstream intersections and the minimum travel time from each, in steps.
    pub neighbors: Vec<(IntersectionId, u32)>,
    pub compatibility: Vec<Compatibility>,
}

impl IntersectionDescriptor {
    pub fn travel_time(&self, neighbor: IntersectionId) -> Option<u32> {
        self.neighbors
            .iter()
            .find(|(n, _)| *n == neighbor)
            .map(|(_, t)| *t)
    }

    pub fn compatible(&self, neighbor: IntersectionId, neighbor_phase: usize, phase: usize) -> bool {
        self.compatibility.contains(&Compatibility {
            neighbor,
            neighbor_phase,
            phase,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntryPoint {
    pub lane: LaneId,
    pub cell: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology<S> {
    lanes: Vec<LaneDescriptor<S>>,
    intersections: Vec<IntersectionDescriptor>,
    entry_points: Vec<EntryPoint>,
}

impl<S: Scalar> NetworkTopology<S> {
    /// Assembles a topology from fully specified parts. No validation is
    /// performed; see [`validate_topology`].
    pub fn new(
        lanes: Vec<LaneDescriptor<S>>,
        intersections: Vec<IntersectionDescriptor>,
        entry_points: Vec<EntryPoint>,
    ) -> Self {
        NetworkTopology {
            lanes,
            intersections,
            entry_points,
        }
    }

    /// Builds a topology from lanes, phases and entry points, deriving the
    /// inbound sets, the upstream neighbors with their travel times
    /// `ceil(length / v_max)`, and the phase compatibility relation.
    pub fn derive(
        lanes: Vec<LaneDescriptor<S>>,
        phases: Vec<Vec<Vec<LaneId>>>,
        entry_points: Vec<EntryPoint>,
        v_max: u8,
    ) -> Self {
        let v_max = usize::from(v_max.max(1));
        let mut intersections: Vec<IntersectionDescriptor> = phases
            .into_iter()
            .map(|phases| IntersectionDescriptor {
                inbound_lanes: Vec::new(),
                phases,
                neighbors: Vec::new(),
                compatibility: Vec::new(),
            })
            .collect();

        for (id, lane) in lanes.iter().enumerate() {
            let Some(i) = lane.downstream.intersection() else {
                continue;
            };
            let Some(node) = intersections.get_mut(i) else {
                continue;
            };
            node.inbound_lanes.push(id);
            if let Upstream::Intersection(up) = lane.upstream {
                let time = lane.length.div_ceil(v_max) as u32;
                match node.neighbors.iter_mut().find(|(n, _)| *n == up) {
                    Some(entry) => entry.1 = entry.1.min(time),
                    None => node.neighbors.push((up, time)),
                }
            }
        }

        let mut compat = vec![BTreeSet::new(); intersections.len()];
        for (i, node) in intersections.iter().enumerate() {
            for &(neighbor, _) in &node.neighbors {
                let Some(up) = intersections.get(neighbor) else {
                    continue;
                };
                for (np, neighbor_phase) in up.phases.iter().enumerate() {
                    // Lanes that vehicles released under `neighbor_phase` move onto.
                    let fed: BTreeSet<LaneId> = neighbor_phase
                        .iter()
                        .filter_map(|&l| lanes.get(l))
                        .flat_map(|l| l.exits.iter())
                        .filter(|(_, w)| *w > S::zero())
                        .map(|(e, _)| *e)
                        .filter(|e| {
                            lanes
                                .get(*e)
                                .is_some_and(|l| l.downstream == Downstream::Intersection(i))
                        })
                        .collect();
                    for (p, phase) in node.phases.iter().enumerate() {
                        if phase.iter().any(|l| fed.contains(l)) {
                            compat[i].insert(Compatibility {
                                neighbor,
                                neighbor_phase: np,
                                phase: p,
                            });
                        }
                    }
                }
            }
        }
        for (node, set) in intersections.iter_mut().zip(compat) {
            node.compatibility = set.into_iter().collect();
        }

        NetworkTopology {
            lanes,
            intersections,
            entry_points,
        }
    }

    pub fn lanes(&self) -> &[LaneDescriptor<S>] {
        &self.lanes
    }

    pub fn lane(&self, id: LaneId) -> &LaneDescriptor<S> {
        &self.lanes[id]
    }

    pub fn intersections(&self) -> &[IntersectionDescriptor] {
        &self.intersections
    }

    pub fn intersection(&self, id: IntersectionId) -> &IntersectionDescriptor {
        &self.intersections[id]
    }

    pub fn entry_points(&self) -> &[EntryPoint] {
        &self.entry_points
    }

    pub fn total_cells(&self) -> usize {
        self.lanes.iter().map(|l| l.length).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subject {
    Lane(LaneId),
    Intersection(IntersectionId),
    Entry(usize),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Lane(id) => write!(f, "lane {id}"),
            Subject::Intersection(id) => write!(f, "intersection {id}"),
            Subject::Entry(idx) => write!(f, "entry point {idx}"),
        }
    }
}

/// A broken topology invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Checks every structural invariant and reports each violation found.
/// An empty report means the topology is usable by the engine.
pub fn validate_topology<S: Scalar>(topology: &NetworkTopology<S>) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut flag = |subject: Subject, message: String| report.push(Violation { subject, message });
    let lanes = topology.lanes();
    let nodes = topology.intersections();

    for (id, lane) in lanes.iter().enumerate() {
        let subject = Subject::Lane(id);
        if lane.length == 0 {
            flag(subject, "length must be at least 1 cell".into());
        }
        if lane.signal_cell != lane.length {
            flag(
                subject,
                format!("signal cell {} must equal lane length {}", lane.signal_cell, lane.length),
            );
        }
        if let Upstream::Intersection(i) = lane.upstream {
            if i >= nodes.len() {
                flag(subject, format!("upstream intersection {i} does not exist"));
            }
        }
        match lane.downstream {
            Downstream::Exit => {
                if !lane.exits.is_empty() {
                    flag(subject, "exit lane must not list successor lanes".into());
                }
            }
            Downstream::Intersection(i) => {
                if i >= nodes.len() {
                    flag(subject, format!("downstream intersection {i} does not exist"));
                }
                if lane.exits.is_empty() {
                    flag(subject, "lane ending at an intersection has no successor lanes".into());
                }
            }
        }
        if !lane.exits.is_empty() {
            let mut sum = S::zero();
            for &(succ, w) in &lane.exits {
                if !(w >= S::zero() && w <= S::one()) {
                    flag(subject, format!("turn probability to lane {succ} is {w}, outside [0, 1]"));
                }
                sum = sum + w;
                match lanes.get(succ) {
                    None => flag(subject, format!("successor lane {succ} does not exist")),
                    Some(next) => {
                        let expected = match lane.downstream {
                            Downstream::Intersection(i) => Upstream::Intersection(i),
                            Downstream::Exit => Upstream::Entry,
                        };
                        if next.upstream != expected {
                            flag(
                                subject,
                                format!("successor lane {succ} does not start where this lane ends"),
                            );
                        }
                    }
                }
            }
            if (sum - S::one()).abs() > S::tolerance() {
                flag(subject, format!("turn probabilities sum to {sum}, expected 1"));
            }
        }
    }

    for (id, node) in nodes.iter().enumerate() {
        let subject = Subject::Intersection(id);
        if node.inbound_lanes.is_empty() {
            flag(subject, "no inbound lanes".into());
        }
        for &l in &node.inbound_lanes {
            match lanes.get(l) {
                None => flag(subject, format!("inbound lane {l} does not exist")),
                Some(lane) if lane.downstream != Downstream::Intersection(id) => flag(
                    subject,
                    format!("inbound lane {l} does not end at this intersection"),
                ),
                _ => {}
            }
        }
        for (l, lane) in lanes.iter().enumerate() {
            if lane.downstream == Downstream::Intersection(id) && !node.inbound_lanes.contains(&l) {
                flag(subject, format!("lane {l} ends here but is not listed as inbound"));
            }
        }
        if node.phases.len() < 2 {
            flag(
                subject,
                format!("needs at least two phases, found {}", node.phases.len()),
            );
        }
        let mut seen: Vec<BTreeSet<LaneId>> = Vec::new();
        for (p, phase) in node.phases.iter().enumerate() {
            if phase.is_empty() {
                flag(subject, format!("phase {p} is empty"));
            }
            if let Some(l) = phase.iter().find(|l| !node.inbound_lanes.contains(l)) {
                flag(subject, format!("phase {p} lists lane {l}, which is not inbound"));
            }
            let set: BTreeSet<LaneId> = phase.iter().copied().collect();
            if seen.contains(&set) {
                flag(subject, format!("phase {p} duplicates an earlier phase"));
            }
            seen.push(set);
        }
        for &(n, time) in &node.neighbors {
            if n >= nodes.len() {
                flag(subject, format!("neighbor {n} does not exist"));
            }
            if time < 1 {
                flag(subject, format!("travel time from neighbor {n} must be at least 1"));
            }
        }
        for c in &node.compatibility {
            if node.travel_time(c.neighbor).is_none() {
                flag(
                    subject,
                    format!("compatibility references non-neighbor {}", c.neighbor),
                );
                continue;
            }
            let neighbor_phases = nodes.get(c.neighbor).map_or(0, |n| n.phases.len());
            if c.neighbor_phase >= neighbor_phases || c.phase >= node.phases.len() {
                flag(
                    subject,
                    format!(
                        "compatibility ({}, {}) -> {} references a missing phase",
                        c.neighbor, c.neighbor_phase, c.phase
                    ),
                );
            }
        }
    }

    for (idx, entry) in topology.entry_points().iter().enumerate() {
        let subject = Subject::Entry(idx);
        match lanes.get(entry.lane) {
            None => flag(subject, format!("lane {} does not exist", entry.lane)),
            Some(lane) => {
                if lane.upstream != Upstream::Entry {
                    flag(subject, format!("lane {} is not a network entry lane", entry.lane));
                }
                if entry.cell >= lane.length {
                    flag(
                        subject,
                        format!("cell {} is beyond lane {} of length {}", entry.cell, entry.lane, lane.length),
                    );
                }
            }
        }
    }

    report
}
