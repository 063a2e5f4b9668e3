use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenarios::listing;
use crate::topology::NetworkTopology;

/// Fixed-time plan: phase `k` is shown for `splits[k]` steps, cycling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedTimePlan {
    pub splits: Vec<u32>,
}

impl FixedTimePlan {
    pub fn cycle(&self) -> u64 {
        self.splits.iter().map(|&s| u64::from(s)).sum()
    }

    /// Phase shown at absolute time `t` (steps since the start of the run).
    pub fn phase_at(&self, t: u64) -> usize {
        let mut offset = t % self.cycle();
        for (phase, &split) in self.splits.iter().enumerate() {
            if offset < u64::from(split) {
                return phase;
            }
            offset -= u64::from(split);
        }
        unreachable!("offset is below the cycle length")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy<S> {
    /// Maximum total differential backlog; identical to `Hca` with alpha 0.
    Backpressure,
    /// Backlog priority plus `alpha` times the neighbor coordination priority.
    Hca { alpha: S },
    FixedTime(FixedTimePlan),
}

impl<S: Scalar> Strategy<S> {
    pub const NAMES: [&'static str; 3] = ["backpressure", "hca", "fixed_time"];

    pub fn from_name(name: &str, alpha: S, splits: &[u32]) -> Result<Self> {
        match name {
            "backpressure" => Ok(Strategy::Backpressure),
            "hca" => Ok(Strategy::Hca { alpha }),
            "fixed_time" => Ok(Strategy::FixedTime(FixedTimePlan {
                splits: splits.to_vec(),
            })),
            other => Err(Error::config(format!(
                "unknown strategy `{other}` (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Backpressure => "backpressure",
            Strategy::Hca { .. } => "hca",
            Strategy::FixedTime(_) => "fixed_time",
        }
    }

    /// Coordination weight actually applied by the phase selection rule.
    pub fn alpha(&self) -> Option<S> {
        match self {
            Strategy::Backpressure => Some(S::zero()),
            Strategy::Hca { alpha } => Some(*alpha),
            Strategy::FixedTime(_) => None,
        }
    }
}

impl<S: Scalar> fmt::Display for Strategy<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Backpressure => f.write_str("backpressure"),
            Strategy::Hca { alpha } => write!(f, "hca(alpha={alpha})"),
            Strategy::FixedTime(plan) => write!(f, "fixed_time({:?})", plan.splits),
        }
    }
}

/// Everything a single run needs.
#[derive(Clone, Debug)]
pub struct SimConfig<S> {
    pub topology: Arc<NetworkTopology<S>>,
    /// Maximum speed in cells per step.
    pub v_max: u8,
    /// Random braking probability.
    pub p: S,
    pub strategy: Strategy<S>,
    /// Arrival probability per step, one per topology entry point.
    pub intensities: Vec<S>,
    pub horizon: u64,
    pub seed: u64,
    /// Minimum number of steps a phase is held before it may change.
    pub min_green: u32,
    /// Count stopped vehicles only within this many cells of a lane's end.
    pub delay_window: Option<usize>,
}

fn check_probability<S: Scalar>(name: &str, value: S) -> Result<()> {
    if value >= S::zero() && value <= S::one() {
        Ok(())
    } else {
        Err(Error::config(format!("{name}: probability out of range [0, 1]: {value}")))
    }
}

impl<S: Scalar> SimConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.v_max == 0 {
            return Err(Error::config("v_max must be at least 1"));
        }
        if self.v_max > i8::MAX as u8 {
            return Err(Error::config("v_max must not exceed 127"));
        }
        check_probability("p", self.p)?;
        if self.intensities.len() != self.topology.entry_points().len() {
            return Err(Error::config(format!(
                "{} intensities given for {} entry points",
                self.intensities.len(),
                self.topology.entry_points().len()
            )));
        }
        for &q in &self.intensities {
            check_probability("q", q)?;
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1 step"));
        }
        match &self.strategy {
            Strategy::Hca { alpha } if !(*alpha >= S::zero() && alpha.is_finite()) => {
                return Err(Error::config(format!("alpha must be a finite value >= 0, got {alpha}")));
            }
            Strategy::FixedTime(plan) => {
                let phases = self.topology.intersections().iter().map(|i| i.phases.len());
                if plan.splits.is_empty() || plan.splits.contains(&0) {
                    return Err(Error::config("fixed_time splits must be non-empty and positive"));
                }
                if phases.into_iter().any(|n| n < plan.splits.len()) {
                    return Err(Error::config(
                        "fixed_time lists more splits than some intersection has phases",
                    ));
                }
            }
            _ => {}
        }
        if self.delay_window == Some(0) {
            return Err(Error::config("delay_window must be at least 1 cell"));
        }
        Ok(())
    }

    /// Stable text form of everything that determines a run's dynamics.
    ///
    /// `Backpressure` and `Hca { alpha: 0 }` have the same canonical form
    /// since they select phases identically.
    pub fn canonical(&self) -> String {
        let strategy = match (&self.strategy, self.strategy.alpha()) {
            (_, Some(alpha)) => format!("select_phase alpha={}", alpha.as_f64()),
            (Strategy::FixedTime(plan), None) => format!("fixed_time splits={:?}", plan.splits),
            _ => unreachable!(),
        };
        let intensities: Vec<String> = self.intensities.iter().map(|q| q.as_f64().to_string()).collect();
        format!(
            "{}v_max={}\np={}\nstrategy={}\nintensities={}\nhorizon={}\nseed={}\nmin_green={}\ndelay_window={:?}\n",
            listing::export(&self.topology),
            self.v_max,
            self.p.as_f64(),
            strategy,
            intensities.join(","),
            self.horizon,
            self.seed,
            self.min_green,
            self.delay_window,
        )
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
