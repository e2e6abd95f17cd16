//! Scenario files: a versioned TOML description of one run.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use trilevel::state::InitialState;
use trilevel::systems::SystemParams;
use trilevel::tolerances as tol;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    Simulate,
    EquivCheck,
    Spectrum,
    G2,
    WaitingTime,
    Trajectories,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Task::Simulate => "simulate",
            Task::EquivCheck => "equiv-check",
            Task::Spectrum => "spectrum",
            Task::G2 => "g2",
            Task::WaitingTime => "waiting-time",
            Task::Trajectories => "trajectories",
        };
        f.write_str(name)
    }
}

/// `count` evenly spaced points from `start` to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        trilevel::observables::uniform_grid(self.start, self.stop, self.count).expect("grid validated")
    }

    fn validate(&self, field: &str) -> Result<(), ScenarioError> {
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(invalid(field, "start and stop must be finite"));
        }
        match self.count {
            0 => Err(invalid(&format!("{field}.count"), "must be at least 1")),
            1 if self.stop != self.start => Err(invalid(field, "a single-point grid needs start == stop")),
            1 => Ok(()),
            _ if !(self.stop > self.start) => Err(invalid(field, "stop must exceed start")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub equivalence: f64,
    pub photon_statistics: f64,
    pub spectrum_relative: f64,
    pub trace: f64,
    pub positivity: f64,
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            equivalence: tol::EQUIVALENCE,
            photon_statistics: tol::PHOTON_STATISTICS,
            spectrum_relative: tol::SPECTRUM_RELATIVE,
            trace: tol::TRACE,
            positivity: tol::POSITIVITY,
            mc_sigmas: tol::MC_SIGMAS,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<(), ScenarioError> {
        let all = [
            ("equivalence", self.equivalence),
            ("photon_statistics", self.photon_statistics),
            ("spectrum_relative", self.spectrum_relative),
            ("trace", self.trace),
            ("positivity", self.positivity),
            ("mc_sigmas", self.mc_sigmas),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(&format!("tolerances.{name}"), format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Overrides the tolerance that gates `task`.
    pub fn set_primary(&mut self, task: Task, value: f64) {
        match task {
            Task::Simulate => self.trace = value,
            Task::EquivCheck => self.equivalence = value,
            Task::Spectrum => self.spectrum_relative = value,
            Task::G2 | Task::WaitingTime => self.photon_statistics = value,
            Task::Trajectories => self.mc_sigmas = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSettings {
    /// Detection operator; the default is the 2→1 lowering operator `|1⟩⟨2|`.
    pub detect: [[f64; 3]; 3],
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings { detect: [[0.0, 1.0, 0.0], [0.0; 3], [0.0; 3]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySettings {
    pub count: usize,
    pub dt: f64,
    /// Inter-jump gaps longer than this count as dark periods.
    pub dark_threshold: f64,
    /// Compare ensemble populations on the time grid with the master equation.
    pub check_populations: bool,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        TrajectorySettings { count: 100, dt: 0.05, dark_threshold: 20.0, check_populations: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Also run the task on the mapped partner system and require agreement.
    pub partner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub task: Task,
    pub system: SystemParams,
    /// Explicit partner for `equiv-check`; derived from the map when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_b: Option<SystemParams>,
    #[serde(default = "default_time")]
    pub time: Grid,
    #[serde(default = "default_frequency")]
    pub frequency: Grid,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub spectrum: SpectrumSettings,
    #[serde(default)]
    pub trajectories: TrajectorySettings,
    #[serde(default)]
    pub checks: Checks,
}

fn default_time() -> Grid {
    Grid { start: 0.0, stop: 20.0, count: 201 }
}

fn default_frequency() -> Grid {
    Grid { start: -10.0, stop: 10.0, count: 1001 }
}

fn default_output() -> PathBuf {
    PathBuf::from("trilevel-out")
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        self.system.validate().map_err(|e| invalid("system", e.to_string()))?;
        if let Some(b) = &self.system_b {
            b.validate().map_err(|e| invalid("system_b", e.to_string()))?;
        }
        self.time.validate("time")?;
        if self.time.start < 0.0 {
            return Err(invalid("time.start", "must be non-negative"));
        }
        self.frequency.validate("frequency")?;
        self.initial.to_density().map_err(|e| invalid("initial", e.to_string()))?;
        self.tolerances.validate()?;
        if self.trajectories.count == 0 {
            return Err(invalid("trajectories.count", "must be at least 1"));
        }
        if !(self.trajectories.dt > 0.0 && self.trajectories.dt.is_finite()) {
            return Err(invalid("trajectories.dt", "must be positive"));
        }
        if !(self.trajectories.dark_threshold > 0.0) {
            return Err(invalid("trajectories.dark_threshold", "must be positive"));
        }
        if self.spectrum.detect.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("spectrum.detect", "entries must be finite"));
        }
        Ok(())
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    Scenario::from_toml(&text)
}
