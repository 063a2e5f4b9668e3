//! Fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use hca_traffic::config::{FixedTimePlan, SimConfig, Strategy};
use hca_traffic::rng::RngStream;
use hca_traffic::scenarios::{build_arterial, build_grid, Scenario};
use hca_traffic::state::{Level1State, Signal, Vehicle};
use hca_traffic::topology::{Downstream, EntryPoint, IntersectionDescriptor, LaneDescriptor, NetworkTopology, Upstream};
use hca_traffic::vehicle::advance_all;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A single lane whose end feeds back into its start. Not a valid signalled
/// network, so it is driven through the vehicle update directly.
pub fn ring(length: usize) -> NetworkTopology<f64> {
    let lane = LaneDescriptor::new(length, Upstream::Intersection(0), Downstream::Intersection(0))
        .with_exits(vec![(0, 1.0)]);
    let node = IntersectionDescriptor {
        inbound_lanes: vec![0],
        phases: vec![vec![0]],
        neighbors: Vec::new(),
        compatibility: Vec::new(),
    };
    NetworkTopology::new(vec![lane], vec![node], Vec::new())
}

/// Mean flow (vehicles passing a point per step) on a ring with evenly
/// spaced vehicles at the given density.
pub fn ring_flow(length: usize, density: f64, v_max: u8, p: f64, seed: u64, warmup: u64, measure: u64) -> f64 {
    let topology = ring(length);
    let count = ((density * length as f64).round() as usize).clamp(1, length);
    let mut state = Level1State::empty(&topology);
    for n in 0..count {
        state.vehicles.push(Vehicle {
            id: n as u64,
            lane: 0,
            cell: n * length / count,
            speed: 0,
            destination: length - 1,
            next_lane: None,
            entered_at: 0,
        });
    }
    state.next_id = count as u64;
    state.cells = state.rebuild_cells(&topology);
    let mut driving = RngStream::new(seed, 1);
    let mut routing = RngStream::new(seed, 2);
    let signals = [Signal::Green];
    let mut moved = 0u64;
    for t in 1..=warmup + measure {
        let advance = advance_all(&state, &signals, &topology, v_max, p, t, &mut driving, &mut routing).unwrap();
        assert!(advance.removed.is_empty());
        assert_eq!(advance.state.vehicles.len(), count);
        state = advance.state;
        if t > warmup {
            moved += state.vehicles.iter().map(|v| u64::from(v.speed)).sum::<u64>();
        }
    }
    moved as f64 / (measure as f64 * length as f64)
}

/// The arterial with idle side roads and the arterial phase held for the
/// whole horizon.
pub fn held_green_road(q: f64, p: f64, horizon: u64, seed: u64) -> SimConfig<f64> {
    let topology = build_arterial::<f64>(4, 40, 2).unwrap();
    let mut intensities = vec![0.0; topology.entry_points().len()];
    intensities[0] = q;
    SimConfig {
        topology: Arc::new(topology),
        v_max: 2,
        p,
        strategy: Strategy::FixedTime(FixedTimePlan {
            splits: vec![horizon as u32 + 1, 1],
        }),
        intensities,
        horizon,
        seed,
        min_green: 0,
        delay_window: None,
    }
}

/// A randomized but valid configuration for invariant checks.
pub fn random_config(seed: u64, horizon: u64) -> SimConfig<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v_max = rng.gen_range(1..=5u8);
    let block = rng.gen_range(usize::from(v_max) + 1..=40);
    let scenario: Scenario<f64> = if rng.gen_bool(0.5) {
        Scenario::grid(rng.gen_range(1..=4), block, v_max).unwrap()
    } else {
        Scenario::arterial(rng.gen_range(1..=5), block, v_max, rng.gen_range(0.0..0.3)).unwrap()
    };
    let strategy = match rng.gen_range(0..3) {
        0 => Strategy::Backpressure,
        1 => Strategy::Hca {
            alpha: rng.gen_range(0.0..2.0),
        },
        _ => Strategy::FixedTime(FixedTimePlan {
            splits: vec![rng.gen_range(1..40), rng.gen_range(1..40)],
        }),
    };
    let q = rng.gen_range(0.0..0.6);
    SimConfig {
        intensities: scenario.intensities(q),
        topology: scenario.topology,
        v_max,
        p: rng.gen_range(0.0..0.5),
        strategy,
        horizon,
        seed,
        min_green: rng.gen_range(0..5),
        delay_window: None,
    }
}

/// A network with one entry lane feeding straight into an exit lane.
pub fn single_entry(length: usize) -> NetworkTopology<f64> {
    let lanes = vec![LaneDescriptor::new(length, Upstream::Entry, Downstream::Exit)];
    NetworkTopology::new(lanes, Vec::new(), vec![EntryPoint { lane: 0, cell: 0 }])
}

pub fn grid_config(q: f64, strategy: Strategy<f64>, seed: u64, horizon: u64) -> SimConfig<f64> {
    let topology = build_grid::<f64>(4, 40, 2).unwrap();
    let entries = topology.entry_points().len();
    SimConfig {
        topology: Arc::new(topology),
        v_max: 2,
        p: 0.2,
        strategy,
        intensities: vec![q; entries],
        horizon,
        seed,
        min_green: 0,
        delay_window: None,
    }
}
