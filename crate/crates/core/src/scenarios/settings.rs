//! Run settings and the config file format.
//!
//! A config file is flat `key = value` text. `#` starts a comment. Keys before
//! any section header apply to the run; `[grid]` and `[arterial]` sections
//! override the geometry of the respective scenario. Unknown keys and
//! sections are rejected.
//!
//! ```text
//! scenario = grid          # grid | arterial | topology
//! topology = net.txt       # listing file, required for scenario = topology
//! strategy = hca           # hca | backpressure | fixed_time
//! q = 0.1                  # arrival probability per step at main entries
//! alpha = 1.0              # default 1.0 for grid, 0.25 for arterial
//! v_max = 2
//! p = 0.2
//! horizon = 3600
//! seed = 1
//! min_green = 0
//! delay_window = 10        # count stops only in the last N cells of a lane
//! splits = 30,30           # fixed_time plan
//!
//! [grid]
//! roads = 4
//! block = 40
//!
//! [arterial]
//! intersections = 4
//! block = 40
//! side_q = 0.02
//! ```
//!
//! A relative `topology` path is resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{
    listing, Scenario, DEFAULT_ARTERIAL_ALPHA, DEFAULT_ARTERIAL_INTERSECTIONS, DEFAULT_BLOCK_CELLS,
    DEFAULT_GRID_ALPHA, DEFAULT_GRID_ROADS, DEFAULT_HORIZON, DEFAULT_P, DEFAULT_SIDE_Q, DEFAULT_V_MAX,
};
use crate::config::{SimConfig, Strategy};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Grid,
    Arterial,
    Topology(PathBuf),
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Grid => "grid",
            ScenarioKind::Arterial => "arterial",
            ScenarioKind::Topology(_) => "topology",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub scenario: ScenarioKind,
    pub strategy: String,
    pub q: f64,
    /// `None` picks the scenario's default weight.
    pub alpha: Option<f64>,
    pub v_max: u8,
    pub p: f64,
    pub horizon: u64,
    pub seed: u64,
    pub min_green: u32,
    pub delay_window: Option<usize>,
    pub splits: Vec<u32>,
    pub grid_roads: usize,
    pub grid_block: usize,
    pub arterial_intersections: usize,
    pub arterial_block: usize,
    pub side_q: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            scenario: ScenarioKind::Grid,
            strategy: "hca".into(),
            q: 0.1,
            alpha: None,
            v_max: DEFAULT_V_MAX,
            p: DEFAULT_P,
            horizon: DEFAULT_HORIZON,
            seed: 1,
            min_green: 0,
            delay_window: None,
            splits: vec![30, 30],
            grid_roads: DEFAULT_GRID_ROADS,
            grid_block: DEFAULT_BLOCK_CELLS,
            arterial_intersections: DEFAULT_ARTERIAL_INTERSECTIONS,
            arterial_block: DEFAULT_BLOCK_CELLS,
            side_q: DEFAULT_SIDE_Q,
        }
    }
}

fn value<T: FromStr>(key: &str, text: &str) -> std::result::Result<T, String> {
    text.parse()
        .map_err(|_| format!("invalid value for `{key}`: `{text}`"))
}

fn list<T: FromStr>(key: &str, text: &str) -> std::result::Result<Vec<T>, String> {
    text.split(',').map(|v| value(key, v.trim())).collect()
}

impl Settings {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut settings = Settings::default();
        let mut section = String::new();
        let base = path.parent().unwrap_or(Path::new(""));
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name != "grid" && name != "arterial" {
                    return Err(fail(format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, found `{line}`")))?;
            let (key, val) = (key.trim(), val.trim());
            settings
                .set(&section, key, val, base)
                .map_err(fail)?;
        }
        settings.validate()?;
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    fn set(&mut self, section: &str, key: &str, val: &str, base: &Path) -> std::result::Result<(), String> {
        match (section, key) {
            ("", "scenario") => {
                self.scenario = match val {
                    "grid" => ScenarioKind::Grid,
                    "arterial" => ScenarioKind::Arterial,
                    "topology" => match &self.scenario {
                        ScenarioKind::Topology(path) => ScenarioKind::Topology(path.clone()),
                        _ => ScenarioKind::Topology(PathBuf::new()),
                    },
                    other => return Err(format!("unknown scenario `{other}`")),
                }
            }
            ("", "topology") => self.scenario = ScenarioKind::Topology(base.join(val)),
            ("", "strategy") => self.strategy = val.to_string(),
            ("", "q") => self.q = value(key, val)?,
            ("", "alpha") => self.alpha = Some(value(key, val)?),
            ("", "v_max") => self.v_max = value(key, val)?,
            ("", "p") => self.p = value(key, val)?,
            ("", "horizon") => self.horizon = value(key, val)?,
            ("", "seed") => self.seed = value(key, val)?,
            ("", "min_green") => self.min_green = value(key, val)?,
            ("", "delay_window") => self.delay_window = Some(value(key, val)?),
            ("", "splits") => self.splits = list(key, val)?,
            ("grid", "roads") => self.grid_roads = value(key, val)?,
            ("grid", "block") => self.grid_block = value(key, val)?,
            ("arterial", "intersections") => self.arterial_intersections = value(key, val)?,
            ("arterial", "block") => self.arterial_block = value(key, val)?,
            ("arterial", "side_q") => self.side_q = value(key, val)?,
            ("", _) => return Err(format!("unknown key `{key}`")),
            (s, _) => return Err(format!("unknown key `{key}` in section [{s}]")),
        }
        Ok(())
    }

    /// Range checks that do not need a built topology.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("p", self.p), ("side_q", self.side_q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name}: probability out of range [0, 1]: {v}")));
            }
        }
        if let Some(alpha) = self.alpha {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::config(format!("alpha must be a finite value >= 0, got {alpha}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1 step"));
        }
        if self.v_max == 0 {
            return Err(Error::config("v_max must be at least 1"));
        }
        if self.scenario == ScenarioKind::Topology(PathBuf::new()) {
            return Err(Error::config("scenario = topology requires a `topology` file"));
        }
        Strategy::<f64>::from_name(&self.strategy, 0.0, &self.splits)?;
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.scenario {
            ScenarioKind::Arterial => DEFAULT_ARTERIAL_ALPHA,
            _ => DEFAULT_GRID_ALPHA,
        })
    }

    pub fn build_scenario<S: Scalar>(&self) -> Result<Scenario<S>> {
        match &self.scenario {
            ScenarioKind::Grid => Scenario::grid(self.grid_roads, self.grid_block, self.v_max),
            ScenarioKind::Arterial => Scenario::arterial(
                self.arterial_intersections,
                self.arterial_block,
                self.v_max,
                S::lit(self.side_q),
            ),
            ScenarioKind::Topology(path) => Ok(Scenario::uniform("topology", listing::load(path, self.v_max)?)),
        }
    }

    pub fn strategy<S: Scalar>(&self) -> Result<Strategy<S>> {
        Strategy::from_name(&self.strategy, S::lit(self.alpha()), &self.splits)
    }

    pub fn sim_config<S: Scalar>(&self) -> Result<SimConfig<S>> {
        self.validate()?;
        let scenario = self.build_scenario::<S>()?;
        let config = SimConfig {
            intensities: scenario.intensities(S::lit(self.q)),
            topology: scenario.topology,
            v_max: self.v_max,
            p: S::lit(self.p),
            strategy: self.strategy()?,
            horizon: self.horizon,
            seed: self.seed,
            min_green: self.min_green,
            delay_window: self.delay_window,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Reads and validates a config file, filling unspecified values with the
/// defaults above.
pub fn load_config<S: Scalar>(path: &Path) -> Result<SimConfig<S>> {
    Settings::load(path)?.sim_config()
}
