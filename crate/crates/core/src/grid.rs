//! Grid geometry shared by both environments: positions, moves, the 5x5
//! perceptive field and the agent place-swap used to build empathic states.
//!
//! Row 0 is the top of the grid and column 0 the left edge, so "above" means
//! a strictly smaller row and "to the right" a strictly larger column.

use rand::Rng;

use crate::error::{Error, Result};

/// Side length of the square observation window.
pub const FIELD_SIDE: usize = 5;
/// Length of a flattened perceptive field.
pub const FIELD_LEN: usize = FIELD_SIDE * FIELD_SIDE;
/// Index of the observing agent inside a flattened field.
pub const FIELD_CENTER: usize = FIELD_LEN / 2;
/// Number of actions available to every agent.
pub const NUM_ACTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must have positive dimensions, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, pos: Position) -> bool {
        pos.row < self.height && pos.col < self.width
    }

    /// Cell for a row-major index in `0..cells()`.
    pub fn position(&self, index: usize) -> Position {
        Position::new(index / self.width, index % self.width)
    }

    pub fn index(&self, pos: Position) -> usize {
        pos.row * self.width + pos.col
    }

    /// `count` distinct cells drawn uniformly without replacement.
    pub fn sample_distinct<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Position>> {
        if count > self.cells() {
            return Err(Error::InvalidArgument(format!(
                "cannot place {count} items on {} cells",
                self.cells()
            )));
        }
        Ok(rand::seq::index::sample(rng, self.cells(), count)
            .into_iter()
            .map(|i| self.position(i))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    NoOp = 4,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::NoOp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("action index {index} out of range")))
    }
}

/// Moves one cell in the action's direction; moves off the grid stay put.
pub fn apply_move(spec: GridSpec, pos: Position, action: Action) -> Position {
    let Position { row, col } = pos;
    match action {
        Action::Up if row > 0 => Position::new(row - 1, col),
        Action::Down if row + 1 < spec.height => Position::new(row + 1, col),
        Action::Left if col > 0 => Position::new(row, col - 1),
        Action::Right if col + 1 < spec.width => Position::new(row, col + 1),
        _ => pos,
    }
}

/// Uniform draw over the five actions.
pub fn random_walk<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::ALL[rng.gen_range(0..NUM_ACTIONS)]
}

/// Flattened row-major 5x5 window centred on the observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptiveField(pub [f64; FIELD_LEN]);

impl PerceptiveField {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Default for PerceptiveField {
    fn default() -> Self {
        Self([0.0; FIELD_LEN])
    }
}

/// Encodes the window around `center`; cells outside the grid read as 0.0.
pub fn encode_field<F>(spec: GridSpec, cell_value: F, center: Position) -> PerceptiveField
where
    F: Fn(Position) -> f64,
{
    let mut field = PerceptiveField::default();
    let half = FIELD_SIDE / 2;
    for dr in 0..FIELD_SIDE {
        for dc in 0..FIELD_SIDE {
            let (Some(row), Some(col)) = (
                (center.row + dr).checked_sub(half),
                (center.col + dc).checked_sub(half),
            ) else {
                continue;
            };
            let pos = Position::new(row, col);
            if spec.contains(pos) {
                field.0[FIELD_SIDE * dr + dc] = cell_value(pos);
            }
        }
    }
    field
}

/// A world containing a learning agent and at most one other agent.
pub trait TwoAgentWorld: Clone {
    fn learner(&self) -> Position;
    fn counterpart(&self) -> Option<Position>;
    /// Exchanges the two agents' situations. Only called with a counterpart present.
    fn exchange_agents(&mut self);
}

/// Builds the imagined world where learner and counterpart have switched
/// places, and returns it with the new observation centre (the counterpart's
/// actual cell). The counterpart may be anywhere on the grid.
pub fn swap_perspective<W: TwoAgentWorld>(world: &W) -> Result<(W, Position)> {
    let other = world.counterpart().ok_or(Error::NoCounterpart)?;
    let mut imagined = world.clone();
    imagined.exchange_agents();
    Ok((imagined, other))
}
