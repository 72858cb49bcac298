//! Empathic deep Q-learning on two-agent gridworlds.
//!
//! The learner keeps two action-value networks. One learns its own returns in
//! the usual DQN way; the other, which drives behaviour, blends that target
//! with the value the learner would expect if it stood in the other agent's
//! place. A selfishness weight `beta` sets the blend.

pub mod agent;
pub mod coexistence;
pub mod environment;
pub mod error;
pub mod grid;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod sharing;

pub use agent::{AgentConfig, AgentRuntime, BaselineMode, EpisodeMetrics};
pub use coexistence::{CoexistenceEnv, CoexistenceState};
pub use environment::{Environment, Feedback};
pub use error::{Error, Result};
pub use grid::{Action, GridSpec, PerceptiveField, Position};
pub use harness::{EnvironmentKind, RunConfig};
pub use nn::{copy_weights, QNetwork, TrainStepReport};
pub use replay::{ReplayMemory, Transition};
pub use sharing::{SharingEnv, SharingState};
