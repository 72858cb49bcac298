//! Uniform driver interface over the two gridworlds.

use rand::RngCore;

use crate::coexistence::{CoexistenceEnv, CoexistenceState};
use crate::error::Result;
use crate::grid::{Action, PerceptiveField};
use crate::sharing::{SharingEnv, SharingState};

/// What the learner sees after one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    /// Unshaped reward earned by the learning agent.
    pub reward: f64,
    pub terminal: bool,
    /// The learner harmed its counterpart on this step.
    pub counterpart_harmed: bool,
    pub learner_harmed: bool,
    /// Equality of the return sums after this step, where defined.
    pub equality: Option<f64>,
}

/// Per-episode tallies that depend on the environment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeTally {
    pub cat_harms: Option<u32>,
    pub robot_harmed: Option<bool>,
    pub batteries_robot: Option<usize>,
    pub batteries_human: Option<usize>,
    pub return_human: Option<f64>,
    pub equality_final: Option<f64>,
}

pub trait Environment {
    type State: Clone;

    fn reset(&self, rng: &mut dyn RngCore) -> Self::State;
    fn step(&self, state: &Self::State, action: Action, rng: &mut dyn RngCore) -> Result<(Self::State, Feedback)>;
    fn observe(&self, state: &Self::State) -> PerceptiveField;
    /// Imagined observation after swapping learner and counterpart, falling
    /// back to the plain observation when there is no counterpart.
    fn observe_empathic(&self, state: &Self::State) -> PerceptiveField;
    /// Folds the final state and the episode's harm events into a tally.
    fn tally(&self, final_state: &Self::State, counterpart_harms: u32, learner_harmed: bool) -> EpisodeTally;
}

impl Environment for CoexistenceEnv {
    type State = CoexistenceState;

    fn reset(&self, rng: &mut dyn RngCore) -> CoexistenceState {
        CoexistenceEnv::reset(self, rng)
    }

    fn step(&self, state: &CoexistenceState, action: Action, rng: &mut dyn RngCore) -> Result<(CoexistenceState, Feedback)> {
        let (next, out) = CoexistenceEnv::step(self, state, action, rng)?;
        Ok((
            next,
            Feedback {
                reward: out.reward,
                terminal: out.terminal,
                counterpart_harmed: out.cat_harmed,
                learner_harmed: out.robot_harmed,
                equality: None,
            },
        ))
    }

    fn observe(&self, state: &CoexistenceState) -> PerceptiveField {
        CoexistenceEnv::observe(self, state)
    }

    fn observe_empathic(&self, state: &CoexistenceState) -> PerceptiveField {
        CoexistenceEnv::observe_empathic(self, state)
    }

    fn tally(&self, _: &CoexistenceState, counterpart_harms: u32, learner_harmed: bool) -> EpisodeTally {
        EpisodeTally {
            cat_harms: Some(counterpart_harms),
            robot_harmed: Some(learner_harmed),
            ..EpisodeTally::default()
        }
    }
}

impl Environment for SharingEnv {
    type State = SharingState;

    fn reset(&self, rng: &mut dyn RngCore) -> SharingState {
        SharingEnv::reset(self, rng)
    }

    fn step(&self, state: &SharingState, action: Action, rng: &mut dyn RngCore) -> Result<(SharingState, Feedback)> {
        let (next, out) = SharingEnv::step(self, state, action, rng)?;
        let equality = next.equality();
        Ok((
            next,
            Feedback {
                reward: out.robot_reward,
                terminal: out.terminal,
                counterpart_harmed: false,
                learner_harmed: false,
                equality: Some(equality),
            },
        ))
    }

    fn observe(&self, state: &SharingState) -> PerceptiveField {
        SharingEnv::observe(self, state)
    }

    fn observe_empathic(&self, state: &SharingState) -> PerceptiveField {
        SharingEnv::observe_empathic(self, state)
    }

    fn tally(&self, state: &SharingState, _: u32, _: bool) -> EpisodeTally {
        EpisodeTally {
            batteries_robot: Some(state.robot_count),
            batteries_human: Some(state.human_count),
            return_human: Some(state.human_return_sum),
            equality_final: Some(state.equality()),
            ..EpisodeTally::default()
        }
    }
}
