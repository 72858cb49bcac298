//! Robot-and-cat survival gridworld.
//!
//! Both agents move simultaneously. They collide when they land on the same
//! cell or exchange cells. In a collision the agent that was above (or, on
//! the same row, to the right of) the other beforehand harms the other. A
//! harmed cat leaves the world; a harmed robot ends the episode.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{
    apply_move, encode_field, random_walk, swap_perspective, Action, GridSpec, PerceptiveField,
    Position, TwoAgentWorld,
};

pub const ROBOT_CELL: f64 = 1.0;
pub const CAT_CELL: f64 = -1.0;
pub const SURVIVAL_REWARD: f64 = 1.0;
pub const DEFAULT_MAX_STEPS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct CoexistenceState {
    pub robot: Position,
    pub cat: Option<Position>,
    pub step: usize,
    pub robot_operative: bool,
}

impl TwoAgentWorld for CoexistenceState {
    fn learner(&self) -> Position {
        self.robot
    }

    fn counterpart(&self) -> Option<Position> {
        self.cat
    }

    fn exchange_agents(&mut self) {
        if let Some(cat) = self.cat.replace(self.robot) {
            self.robot = cat;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub cat_harmed: bool,
    pub robot_harmed: bool,
}

/// Which of two colliding agents does the harm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmer {
    First,
    Second,
}

/// Harm rule on the agents' positions before the collision. Row order
/// (smaller row is "above") dominates; the larger column wins on a row tie.
pub fn harm_winner(first: Position, second: Position) -> Result<Harmer> {
    if first == second {
        return Err(Error::InvalidArgument(format!(
            "colliding agents cannot share a prior cell {first:?}"
        )));
    }
    let first_wins = first.row < second.row || (first.row == second.row && first.col > second.col);
    Ok(if first_wins { Harmer::First } else { Harmer::Second })
}

/// True when simultaneous moves `a0 -> a1` and `b0 -> b1` collide.
pub fn collides(a0: Position, a1: Position, b0: Position, b1: Position) -> bool {
    a1 == b1 || (a1 == b0 && b1 == a0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceEnv {
    pub spec: GridSpec,
    pub max_steps: usize,
}

impl CoexistenceEnv {
    pub fn new(spec: GridSpec, max_steps: usize) -> Result<Self> {
        if spec.cells() < 2 {
            return Err(Error::InvalidArgument("coexistence needs at least two cells".into()));
        }
        if max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(Self { spec, max_steps })
    }

    /// Robot and cat on distinct uniformly random cells.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> CoexistenceState {
        let cells = self
            .spec
            .sample_distinct(2, rng)
            .expect("constructor guarantees two cells");
        CoexistenceState {
            robot: cells[0],
            cat: Some(cells[1]),
            step: 0,
            robot_operative: true,
        }
    }

    pub fn is_terminal(&self, state: &CoexistenceState) -> bool {
        !state.robot_operative || state.step >= self.max_steps
    }

    /// Advances one step with the cat taking a random-walk action.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &CoexistenceState,
        robot_action: Action,
        rng: &mut R,
    ) -> Result<(CoexistenceState, StepOutcome)> {
        if self.is_terminal(state) {
            return Err(Error::Terminal);
        }
        let cat_action = state.cat.map(|_| random_walk(rng));
        self.step_joint(state, robot_action, cat_action.unwrap_or(Action::NoOp))
    }

    /// Advances one step with both actions given. `cat_action` is ignored once
    /// the cat has left.
    pub fn step_joint(
        &self,
        state: &CoexistenceState,
        robot_action: Action,
        cat_action: Action,
    ) -> Result<(CoexistenceState, StepOutcome)> {
        if self.is_terminal(state) {
            return Err(Error::Terminal);
        }
        let robot_next = apply_move(self.spec, state.robot, robot_action);
        let mut next = CoexistenceState {
            robot: robot_next,
            cat: None,
            step: state.step + 1,
            robot_operative: true,
        };
        let mut outcome = StepOutcome {
            reward: SURVIVAL_REWARD,
            terminal: false,
            cat_harmed: false,
            robot_harmed: false,
        };

        if let Some(cat) = state.cat {
            let cat_next = apply_move(self.spec, cat, cat_action);
            if collides(state.robot, robot_next, cat, cat_next) {
                match harm_winner(state.robot, cat)? {
                    Harmer::First => outcome.cat_harmed = true,
                    Harmer::Second => {
                        outcome.robot_harmed = true;
                        next.robot_operative = false;
                        next.cat = Some(cat_next);
                        outcome.reward = 0.0;
                    }
                }
            } else {
                next.cat = Some(cat_next);
            }
        }

        outcome.terminal = self.is_terminal(&next);
        Ok((next, outcome))
    }

    /// Window around the robot: robot 1, cat -1, floor 0.
    pub fn observe(&self, state: &CoexistenceState) -> PerceptiveField {
        encode_field(self.spec, |p| cell_value(state, p), state.robot)
    }

    /// Window around the robot imagined in the cat's place. Falls back to
    /// [`CoexistenceEnv::observe`] once the cat is gone.
    pub fn observe_empathic(&self, state: &CoexistenceState) -> PerceptiveField {
        match swap_perspective(state) {
            Ok((imagined, center)) => encode_field(self.spec, |p| cell_value(&imagined, p), center),
            Err(_) => self.observe(state),
        }
    }
}

fn cell_value(state: &CoexistenceState, pos: Position) -> f64 {
    if pos == state.robot {
        ROBOT_CELL
    } else if Some(pos) == state.cat {
        CAT_CELL
    } else {
        0.0
    }
}
