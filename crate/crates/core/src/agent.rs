//! Empathic DQN.
//!
//! Two online networks share one target network. `q_self` learns the usual
//! DQN target `y = r + gamma * max_a q_target(s')`. `q_emp`, which also picks
//! the actions, learns
//!
//! `y_emp = beta * y + (1 - beta) * gamma * max_a q_target(s_emp')`
//!
//! where `s_emp'` is the learner's view of the world with itself and the other
//! agent switched. `beta = 1` is plain DQN.

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{EpisodeTally, Environment, Feedback};
use crate::error::{Error, Result};
use crate::grid::{Action, PerceptiveField, FIELD_LEN, NUM_ACTIONS};
use crate::nn::QNetwork;
use crate::replay::{ReplayMemory, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    #[default]
    None,
    HarmPenalty,
    EqualityModulated,
}

impl BaselineMode {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMode::None => "none",
            BaselineMode::HarmPenalty => "harm_penalty",
            BaselineMode::EqualityModulated => "equality_modulated",
        }
    }
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(BaselineMode::None),
            "harm_penalty" => Ok(BaselineMode::HarmPenalty),
            "equality_modulated" => Ok(BaselineMode::EqualityModulated),
            other => Err(Error::Config(format!(
                "unknown baseline mode `{other}` (expected none, harm_penalty or equality_modulated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Selfishness: weight of the learner's own target in the empathic target.
    pub beta: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    pub warm_start: usize,
    pub baseline_mode: BaselineMode,
    pub harm_penalty_value: f64,
    pub hidden_layers: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 0.99,
            learning_rate: 1e-3,
            batch_size: 32,
            replay_capacity: 500_000,
            target_sync_steps: 10_000,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: 1_000_000,
            warm_start: 1_000,
            baseline_mode: BaselineMode::None,
            harm_penalty_value: -100.0,
            hidden_layers: vec![128, 128],
        }
    }
}

impl AgentConfig {
    /// Checks every field, naming offenders relative to `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{prefix}{key}: {msg}")));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", format!("must lie in [0, 1], got {}", self.beta));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", format!("must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be positive, got {}", self.learning_rate));
        }
        for (key, v) in [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("target_sync_steps", self.target_sync_steps),
            ("epsilon_decay_steps", self.epsilon_decay_steps),
            ("warm_start", self.warm_start),
        ] {
            if v == 0 {
                return bad(key, "must be positive".into());
            }
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", format!("must hold at least one batch of {}", self.batch_size));
        }
        if !(self.epsilon_end >= 0.0 && self.epsilon_start >= self.epsilon_end && self.epsilon_start <= 1.0) {
            return bad(
                "epsilon_start",
                format!(
                    "need 1 >= epsilon_start >= epsilon_end >= 0, got {} and {}",
                    self.epsilon_start, self.epsilon_end
                ),
            );
        }
        if !self.harm_penalty_value.is_finite() {
            return bad("harm_penalty_value", "must be finite".into());
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden_layers", "widths must be positive".into());
        }
        Ok(())
    }

    /// Replay size at which gradient steps begin.
    pub fn warm_threshold(&self) -> usize {
        self.batch_size.max(self.warm_start)
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![FIELD_LEN];
        dims.extend(&self.hidden_layers);
        dims.push(NUM_ACTIONS);
        dims
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over the decay window.
pub fn epsilon_at(config: &AgentConfig, global_step: u64) -> f64 {
    let decay = config.epsilon_decay_steps as u64;
    if global_step >= decay {
        return config.epsilon_end;
    }
    let frac = global_step as f64 / decay as f64;
    config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)
}

/// Argmax with ties going to the lowest index.
pub fn greedy_action(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `r` at terminal transitions, else `r + gamma * next_max`.
pub fn self_target_from_max(reward: f64, next_max: f64, terminal: bool, gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * next_max
    }
}

/// `beta * y + (1 - beta) * gamma * empathic_max`; the bootstrap term is
/// dropped when the imagined successor is terminal.
pub fn empathic_target_from_max(self_target: f64, empathic_max: f64, terminal: bool, gamma: f64, beta: f64) -> f64 {
    if terminal {
        beta * self_target
    } else {
        beta * self_target + (1.0 - beta) * gamma * empathic_max
    }
}

fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn self_target(reward: f64, next_state: &PerceptiveField, terminal: bool, q_target: &QNetwork, gamma: f64) -> Result<f64> {
    let next_max = max_value(&q_target.forward(next_state.as_slice())?);
    Ok(self_target_from_max(reward, next_max, terminal, gamma))
}

pub fn empathic_target(
    self_target: f64,
    empathic_next_state: &PerceptiveField,
    terminal: bool,
    q_target: &QNetwork,
    gamma: f64,
    beta: f64,
) -> Result<f64> {
    let emp_max = max_value(&q_target.forward(empathic_next_state.as_slice())?);
    Ok(empathic_target_from_max(self_target, emp_max, terminal, gamma, beta))
}

/// Applies the configured hard-coded reward shaping.
pub fn shape_reward(mode: BaselineMode, raw: f64, feedback: &Feedback, harm_penalty: f64) -> f64 {
    match mode {
        BaselineMode::None => raw,
        BaselineMode::HarmPenalty if feedback.counterpart_harmed => raw + harm_penalty,
        BaselineMode::HarmPenalty => raw,
        BaselineMode::EqualityModulated => raw * feedback.equality.unwrap_or(1.0),
    }
}

/// Targets of one sampled batch, recorded when logging is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBatch {
    pub self_targets: Vec<f64>,
    pub empathic_targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    /// Steps the learner was operative.
    pub steps_survived: usize,
    /// Unshaped reward collected by the learner.
    pub return_robot: f64,
    pub epsilon: f64,
    pub gradient_steps: usize,
    pub mean_loss_self: Option<f64>,
    pub mean_loss_emp: Option<f64>,
    pub tally: EpisodeTally,
}

pub struct AgentRuntime {
    config: AgentConfig,
    q_self: QNetwork,
    q_target: QNetwork,
    q_emp: QNetwork,
    memory: ReplayMemory,
    global_step: u64,
    rng: ChaCha8Rng,
    target_log: Option<Vec<TargetBatch>>,
}

impl AgentRuntime {
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate("agent.")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = config.layer_dims();
        let q_self = QNetwork::new(&dims, &mut rng)?;
        let q_target = q_self.clone();
        let q_emp = QNetwork::new(&dims, &mut rng)?;
        let memory = ReplayMemory::new(config.replay_capacity)?;
        Ok(Self {
            config,
            q_self,
            q_target,
            q_emp,
            memory,
            global_step: 0,
            rng,
            target_log: None,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn q_self(&self) -> &QNetwork {
        &self.q_self
    }

    pub fn q_target(&self) -> &QNetwork {
        &self.q_target
    }

    pub fn q_emp(&self) -> &QNetwork {
        &self.q_emp
    }

    pub fn q_emp_mut(&mut self) -> &mut QNetwork {
        &mut self.q_emp
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(&self.config, self.global_step)
    }

    /// Starts (or stops) recording the targets of every sampled batch.
    pub fn record_targets(&mut self, enabled: bool) {
        self.target_log = enabled.then(Vec::new);
    }

    pub fn target_log(&self) -> &[TargetBatch] {
        self.target_log.as_deref().unwrap_or_default()
    }

    pub fn take_target_log(&mut self) -> Vec<TargetBatch> {
        self.target_log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Epsilon-greedy over `q_emp` at the current exploration rate.
    pub fn select_action(&mut self, state: &PerceptiveField) -> Result<Action> {
        let epsilon = self.epsilon();
        self.select_action_with(state, epsilon)
    }

    pub fn select_action_with(&mut self, state: &PerceptiveField, epsilon: f64) -> Result<Action> {
        if self.rng.gen::<f64>() < epsilon {
            return Ok(Action::ALL[self.rng.gen_range(0..NUM_ACTIONS)]);
        }
        let values = self.q_emp.forward(state.as_slice())?;
        Action::from_index(greedy_action(&values))
    }

    /// Runs one episode of interaction and learning.
    pub fn train_episode<E: Environment>(&mut self, env: &E) -> Result<EpisodeMetrics> {
        let mut state = env.reset(&mut self.rng);
        let mut observation = env.observe(&state);
        let mut steps_survived = 0;
        let mut return_robot = 0.0;
        let mut harms = 0u32;
        let mut learner_harmed = false;
        let mut losses = (0.0, 0.0, 0usize);

        loop {
            let action = self.select_action(&observation)?;
            let (next, feedback) = env.step(&state, action, &mut self.rng)?;
            let reward = shape_reward(
                self.config.baseline_mode,
                feedback.reward,
                &feedback,
                self.config.harm_penalty_value,
            );
            let next_observation = env.observe(&next);
            self.memory.push(Transition {
                state: observation,
                action: action.index(),
                reward,
                next_state: next_observation,
                empathic_next_state: env.observe_empathic(&next),
                terminal: feedback.terminal,
                empathic_terminal: feedback.counterpart_harmed,
            })?;
            self.global_step += 1;

            if self.memory.len() >= self.config.warm_threshold() {
                let (l_self, l_emp) = self.learn()?;
                losses.0 += l_self;
                losses.1 += l_emp;
                losses.2 += 1;
            }
            if self.global_step % self.config.target_sync_steps as u64 == 0 {
                self.q_target.copy_from(&self.q_self)?;
            }

            return_robot += feedback.reward;
            if !feedback.learner_harmed {
                steps_survived += 1;
            }
            harms += u32::from(feedback.counterpart_harmed);
            learner_harmed |= feedback.learner_harmed;
            state = next;
            observation = next_observation;
            if feedback.terminal {
                break;
            }
        }

        let per_step = |sum: f64| (losses.2 > 0).then(|| sum / losses.2 as f64);
        Ok(EpisodeMetrics {
            steps_survived,
            return_robot,
            epsilon: self.epsilon(),
            gradient_steps: losses.2,
            mean_loss_self: per_step(losses.0),
            mean_loss_emp: per_step(losses.1),
            tally: env.tally(&state, harms, learner_harmed),
        })
    }

    /// One sampled batch: a gradient step on `q_self` toward `y` and one on
    /// `q_emp` toward `y_emp`, both bootstrapped from `q_target`.
    fn learn(&mut self) -> Result<(f64, f64)> {
        let n = self.config.batch_size;
        let batch = self.memory.sample(n, &mut self.rng)?;
        let mut states = Array2::zeros((n, FIELD_LEN));
        // rows 0..n hold s', rows n..2n hold s_emp'
        let mut successors = Array2::zeros((2 * n, FIELD_LEN));
        let mut actions = Vec::with_capacity(n);
        for (j, t) in batch.iter().enumerate() {
            states.row_mut(j).assign(&ndarray::aview1(t.state.as_slice()));
            successors.row_mut(j).assign(&ndarray::aview1(t.next_state.as_slice()));
            successors
                .row_mut(n + j)
                .assign(&ndarray::aview1(t.empathic_next_state.as_slice()));
            actions.push(t.action);
        }
        let q_next = self.q_target.forward_batch(successors.view())?;
        let (gamma, beta) = (self.config.gamma, self.config.beta);
        let mut y = Vec::with_capacity(n);
        let mut y_emp = Vec::with_capacity(n);
        for (j, t) in batch.iter().enumerate() {
            let next_max = max_value(q_next.slice(s![j, ..]).as_slice().unwrap());
            let emp_max = max_value(q_next.slice(s![n + j, ..]).as_slice().unwrap());
            let target = self_target_from_max(t.reward, next_max, t.terminal, gamma);
            y.push(target);
            y_emp.push(empathic_target_from_max(
                target,
                emp_max,
                t.terminal || t.empathic_terminal,
                gamma,
                beta,
            ));
        }
        let lr = self.config.learning_rate;
        let self_report = self.q_self.train_step(states.view(), &actions, &y, lr)?;
        let emp_report = self.q_emp.train_step(states.view(), &actions, &y_emp, lr)?;
        if let Some(log) = self.target_log.as_mut() {
            log.push(TargetBatch {
                self_targets: y,
                empathic_targets: y_emp,
            });
        }
        Ok((self_report.mean_loss, emp_report.mean_loss))
    }
}
