//! Experiment configuration files (TOML).
//!
//! ```toml
//! environment = "coexistence"   # or "sharing"
//! grid_width = 8
//! grid_height = 8
//! episodes = 1500
//! max_steps_per_episode = 100
//! runs = 5
//! base_seed = 0
//! output_dir = "runs/coexistence"
//! smoothing_window = 100
//!
//! [agent]
//! beta = 0.5
//! epsilon_decay_steps = 50000
//! ```
//!
//! Every key is optional except `environment`; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::coexistence::CoexistenceEnv;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::sharing::{SharingEnv, DEFAULT_BATTERIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    Coexistence,
    Sharing,
}

impl EnvironmentKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvironmentKind::Coexistence => "coexistence",
            EnvironmentKind::Sharing => "sharing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvironmentKind,
    #[serde(default = "defaults::grid_side")]
    pub grid_width: usize,
    #[serde(default = "defaults::grid_side")]
    pub grid_height: usize,
    #[serde(default = "defaults::episodes")]
    pub episodes: usize,
    #[serde(default = "defaults::max_steps")]
    pub max_steps_per_episode: usize,
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "defaults::smoothing_window")]
    pub smoothing_window: usize,
    /// Sharing only.
    #[serde(default = "defaults::batteries")]
    pub battery_count: usize,
    /// Sharing only: offset added to agent cell encodings (0 disables).
    #[serde(default)]
    pub agent_encoding_offset: f64,
    #[serde(default)]
    pub agent: AgentConfig,
}

mod defaults {
    use std::path::PathBuf;

    pub fn grid_side() -> usize {
        8
    }
    pub fn episodes() -> usize {
        1_500
    }
    pub fn max_steps() -> usize {
        500
    }
    pub fn runs() -> usize {
        5
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("runs")
    }
    pub fn smoothing_window() -> usize {
        100
    }
    pub fn batteries() -> usize {
        super::DEFAULT_BATTERIES
    }
}

impl RunConfig {
    /// Defaults for everything but the environment.
    pub fn new(environment: EnvironmentKind) -> Self {
        Self {
            environment,
            grid_width: defaults::grid_side(),
            grid_height: defaults::grid_side(),
            episodes: defaults::episodes(),
            max_steps_per_episode: defaults::max_steps(),
            runs: defaults::runs(),
            base_seed: 0,
            output_dir: defaults::output_dir(),
            smoothing_window: defaults::smoothing_window(),
            battery_count: defaults::batteries(),
            agent_encoding_offset: 0.0,
            agent: AgentConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config(format!("{key}: {msg}")));
        if self.grid_width < 3 || self.grid_height < 3 {
            return bad("grid_width", "grid must be at least 3x3");
        }
        for (key, v) in [
            ("episodes", self.episodes),
            ("max_steps_per_episode", self.max_steps_per_episode),
            ("runs", self.runs),
            ("smoothing_window", self.smoothing_window),
        ] {
            if v == 0 {
                return bad(key, "must be positive");
            }
        }
        if self.base_seed.checked_add(self.runs as u64).is_none() {
            return bad("base_seed", "base_seed + runs overflows");
        }
        if !self.agent_encoding_offset.is_finite() {
            return bad("agent_encoding_offset", "must be finite");
        }
        if self.environment == EnvironmentKind::Sharing
            && self.grid_width * self.grid_height < self.battery_count + 2
        {
            return bad("battery_count", "grid has no room for the agents and every battery");
        }
        self.agent.validate("agent.")
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            width: self.grid_width,
            height: self.grid_height,
        }
    }

    pub fn seed_for_run(&self, run: usize) -> u64 {
        self.base_seed + run as u64
    }

    pub fn coexistence_env(&self) -> Result<CoexistenceEnv> {
        CoexistenceEnv::new(self.grid(), self.max_steps_per_episode)
    }

    pub fn sharing_env(&self) -> Result<SharingEnv> {
        Ok(SharingEnv::new(self.grid(), self.max_steps_per_episode, self.battery_count)?
            .with_agent_offset(self.agent_encoding_offset))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
