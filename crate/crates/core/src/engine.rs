//! One simulation run: the four-stage step and the stop-delay metric.
//!
//! Each step executes, in order:
//!
//! 1. injection and movement of vehicles (level 1), using the signal
//!    indications produced at the end of the previous step,
//! 2. lane occupancies and backlogs (level 2),
//! 3. phase selection at every intersection from a snapshot of the previous
//!    intersection states (level 3),
//! 4. signal indications written back to the lanes (level 2).
//!
//! Stop delay is one vehicle-step for every vehicle standing still at the end
//! of a step, excluding vehicles placed on the network during that step.

use std::fmt::Write as _;
use std::io::Write;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::lane::{apply_signal_indications, update_lanes};
use crate::rng::RngStreams;
use crate::scalar::Scalar;
use crate::signal::Controller;
use crate::state::{IntersectionState, LaneState, Level1State, Signal};
use crate::topology::{validate_topology, NetworkTopology};
use crate::vehicle::{advance_all, inject, ArrivalQueue};

/// Counts accumulated by a single step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepDelta {
    pub arrived: u64,
    pub injected: u64,
    pub removed: u64,
    pub stopped: u64,
}

/// Result of a run, plus enough provenance to reproduce it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricsRecord {
    /// Vehicle-steps spent at speed zero.
    pub total_stop_delay: u64,
    /// Arrivals generated at the entry points, placed or still waiting.
    pub vehicles_arrived: u64,
    pub vehicles_injected: u64,
    pub vehicles_removed: u64,
    pub vehicles_in_network: u64,
    /// Arrivals still waiting for a free entry cell.
    pub vehicles_queued: u64,
    pub horizon: u64,
    pub seed: u64,
    pub config_digest: String,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "seed,horizon,config_digest,total_stop_delay,vehicles_arrived,\
vehicles_injected,vehicles_removed,vehicles_in_network,vehicles_queued";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.horizon,
            self.config_digest,
            self.total_stop_delay,
            self.vehicles_arrived,
            self.vehicles_injected,
            self.vehicles_removed,
            self.vehicles_in_network,
            self.vehicles_queued
        )
    }

    fn add(&mut self, delta: StepDelta) {
        self.total_stop_delay += delta.stopped;
        self.vehicles_arrived += delta.arrived;
        self.vehicles_injected += delta.injected;
        self.vehicles_removed += delta.removed;
    }
}

/// Vehicles at speed zero, ignoring those that entered during `step`.
/// With a `window`, only vehicles within that many cells of their lane's
/// end are counted.
pub fn count_stopped<S: Scalar>(
    level1: &Level1State,
    step: u64,
    topology: &NetworkTopology<S>,
    window: Option<usize>,
) -> u64 {
    level1
        .vehicles
        .iter()
        .filter(|v| v.speed == 0 && v.entered_at != step)
        .filter(|v| window.is_none_or(|w| v.cell + w >= topology.lane(v.lane).length))
        .count() as u64
}

#[derive(Clone, Debug)]
pub struct Simulation<S> {
    config: SimConfig<S>,
    controller: Controller<S>,
    level1: Level1State,
    lanes: Vec<LaneState<S>>,
    intersections: Vec<IntersectionState>,
    queue: ArrivalQueue,
    streams: RngStreams,
    time: u64,
    metrics: MetricsRecord,
}

impl<S: Scalar> Simulation<S> {
    /// Validates the configuration and topology and sets up an empty network
    /// with every intersection in phase 0.
    pub fn new(config: SimConfig<S>) -> Result<Self> {
        config.validate()?;
        let report = validate_topology(&config.topology);
        if !report.is_empty() {
            return Err(Error::Topology(report));
        }
        let topology = &config.topology;
        let intersections = vec![IntersectionState::default(); topology.intersections().len()];
        let signals = apply_signal_indications(&intersections, topology);
        let lanes = signals
            .iter()
            .map(|&signal| LaneState {
                signal,
                ..LaneState::default()
            })
            .collect();
        let metrics = MetricsRecord {
            horizon: config.horizon,
            seed: config.seed,
            config_digest: config.digest(),
            ..MetricsRecord::default()
        };
        Ok(Simulation {
            controller: Controller::new(config.strategy.clone(), config.min_green),
            level1: Level1State::empty(topology),
            lanes,
            intersections,
            queue: ArrivalQueue::new(topology.entry_points().len()),
            streams: RngStreams::from_seed(config.seed),
            time: 0,
            metrics,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig<S> {
        &self.config
    }

    pub fn level1(&self) -> &Level1State {
        &self.level1
    }

    pub fn lanes(&self) -> &[LaneState<S>] {
        &self.lanes
    }

    pub fn intersections(&self) -> &[IntersectionState] {
        &self.intersections
    }

    pub fn signals(&self) -> Vec<Signal> {
        self.lanes.iter().map(|l| l.signal).collect()
    }

    /// Completed steps.
    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn metrics(&self) -> MetricsRecord {
        MetricsRecord {
            vehicles_in_network: self.level1.vehicles.len() as u64,
            vehicles_queued: self.queue.total(),
            ..self.metrics.clone()
        }
    }

    pub fn step(&mut self) -> Result<StepDelta> {
        let step = self.time + 1;
        let topology = &*self.config.topology;
        let signals = self.signals();

        let advance = advance_all(
            &self.level1,
            &signals,
            topology,
            self.config.v_max,
            self.config.p,
            step,
            &mut self.streams.driving,
            &mut self.streams.routing,
        )?;
        self.level1 = advance.state;
        let injection = inject(
            &mut self.level1,
            &mut self.queue,
            topology,
            &self.config.intensities,
            step,
            &mut self.streams.arrivals,
        );

        update_lanes(&self.level1, topology, &mut self.lanes);

        let backlogs: Vec<S> = self.lanes.iter().map(|l| l.backlog).collect();
        self.intersections = self.controller.update(&self.intersections, &backlogs, step, topology);

        for (lane, signal) in self
            .lanes
            .iter_mut()
            .zip(apply_signal_indications(&self.intersections, topology))
        {
            lane.signal = signal;
        }

        let delta = StepDelta {
            arrived: injection.arrived,
            injected: injection.injected,
            removed: advance.removed.len() as u64,
            stopped: count_stopped(&self.level1, step, topology, self.config.delay_window),
        };
        self.metrics.add(delta);
        self.time = step;
        Ok(delta)
    }

    /// Full invariant check of the current state; intended for tests and
    /// debugging, it costs a pass over every cell.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |detail: String| Error::Invariant {
            step: self.time,
            detail,
            dump: String::new(),
        };
        self.level1
            .check_invariants(&self.config.topology, self.config.v_max)
            .map_err(fail)?;
        let m = self.metrics();
        if m.vehicles_injected != m.vehicles_removed + m.vehicles_in_network {
            return Err(fail(format!("vehicle conservation broken: {m:?}")));
        }
        if m.vehicles_arrived != m.vehicles_injected + m.vehicles_queued {
            return Err(fail(format!("arrival conservation broken: {m:?}")));
        }
        let topology = &self.config.topology;
        let expected = apply_signal_indications(&self.intersections, topology);
        for (id, (lane, signal)) in self.lanes.iter().zip(expected).enumerate() {
            if lane.signal != signal || lane.occupancy > topology.lane(id).length {
                return Err(fail(format!("lane {id} state {lane:?} inconsistent")));
            }
        }
        for (id, (state, node)) in self.intersections.iter().zip(topology.intersections()).enumerate() {
            if state.phase >= node.phases.len() {
                return Err(fail(format!("intersection {id} has invalid phase {}", state.phase)));
            }
        }
        Ok(())
    }

    fn trace_header(&self) -> String {
        let mut out = String::from("step,stopped");
        for i in 0..self.intersections.len() {
            let _ = write!(out, ",pi_{i},tau_{i}");
        }
        for l in 0..self.lanes.len() {
            let _ = write!(out, ",o_{l},delta_{l},gamma_{l}");
        }
        out
    }

    fn trace_row(&self, delta: StepDelta) -> String {
        let mut out = format!("{},{}", self.time, delta.stopped);
        for s in &self.intersections {
            let _ = write!(out, ",{},{}", s.phase, s.elapsed);
        }
        for l in &self.lanes {
            let _ = write!(out, ",{},{:.4},{}", l.occupancy, l.backlog.as_f64(), l.signal.indication());
        }
        out
    }
}

/// Runs `config.horizon` steps from an empty network.
pub fn run<S: Scalar>(config: SimConfig<S>) -> Result<MetricsRecord> {
    let mut sim = Simulation::new(config)?;
    for _ in 0..sim.config.horizon {
        sim.step()?;
    }
    Ok(sim.metrics())
}

/// Like [`run`], writing one CSV row per step to `out`.
pub fn run_traced<S: Scalar, W: Write>(config: SimConfig<S>, mut out: W) -> Result<MetricsRecord> {
    let mut sim = Simulation::new(config)?;
    let io = |e| Error::io("writing trace", e);
    writeln!(out, "{}", sim.trace_header()).map_err(io)?;
    for _ in 0..sim.config.horizon {
        let delta = sim.step()?;
        writeln!(out, "{}", sim.trace_row(delta)).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(sim.metrics())
}
