//! Robot-and-human battery gridworld with per-agent diminishing returns.
//!
//! Each agent's first battery is worth 1.0 and every later one 0.1 less.
//! Agents may share cells; there is no harm in this world. The window
//! encodes floor as 0, batteries as -1 and each agent as its collected count.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{
    apply_move, encode_field, random_walk, swap_perspective, Action, GridSpec, PerceptiveField,
    Position, TwoAgentWorld,
};

pub const BATTERY_CELL: f64 = -1.0;
pub const DEFAULT_BATTERIES: usize = 9;
pub const DEFAULT_MAX_STEPS: usize = 500;

/// Reward for collecting a battery after `count_before` earlier ones.
pub fn diminishing_reward(count_before: usize) -> f64 {
    (1.0 - 0.1 * count_before as f64).max(0.0)
}

/// Sum of the first `count` schedule values, accumulated in collection order.
pub fn schedule_sum(count: usize) -> f64 {
    (0..count).map(diminishing_reward).fold(0.0, |acc, r| acc + r)
}

/// `2 * min(a, b) / (a + b)`, defined as 1.0 when both sums are zero.
pub fn equality(robot_sum: f64, human_sum: f64) -> f64 {
    debug_assert!(robot_sum >= 0.0 && human_sum >= 0.0);
    let total = robot_sum + human_sum;
    if total <= 0.0 {
        return 1.0;
    }
    (2.0 * robot_sum.min(human_sum) / total).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharingState {
    pub robot: Position,
    pub human: Position,
    pub robot_count: usize,
    pub human_count: usize,
    pub batteries: BTreeSet<Position>,
    pub robot_return_sum: f64,
    pub human_return_sum: f64,
    pub step: usize,
}

impl SharingState {
    pub fn equality(&self) -> f64 {
        equality(self.robot_return_sum, self.human_return_sum)
    }
}

impl TwoAgentWorld for SharingState {
    fn learner(&self) -> Position {
        self.robot
    }

    fn counterpart(&self) -> Option<Position> {
        Some(self.human)
    }

    /// Positions, counts and return sums all change hands.
    fn exchange_agents(&mut self) {
        std::mem::swap(&mut self.robot, &mut self.human);
        std::mem::swap(&mut self.robot_count, &mut self.human_count);
        std::mem::swap(&mut self.robot_return_sum, &mut self.human_return_sum);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharingOutcome {
    pub robot_reward: f64,
    pub human_reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharingEnv {
    pub spec: GridSpec,
    pub max_steps: usize,
    pub battery_count: usize,
    /// Added to agent cell values; 0.0 reproduces the plain count encoding,
    /// where an agent holding no batteries looks like floor.
    pub agent_offset: f64,
}

impl SharingEnv {
    pub fn new(spec: GridSpec, max_steps: usize, battery_count: usize) -> Result<Self> {
        if spec.cells() < battery_count + 2 {
            return Err(Error::InvalidArgument(format!(
                "{} cells cannot hold two agents and {battery_count} batteries",
                spec.cells()
            )));
        }
        if max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(Self {
            spec,
            max_steps,
            battery_count,
            agent_offset: 0.0,
        })
    }

    pub fn with_agent_offset(mut self, offset: f64) -> Self {
        self.agent_offset = offset;
        self
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> SharingState {
        let cells = self
            .spec
            .sample_distinct(self.battery_count + 2, rng)
            .expect("constructor checked the cell count");
        SharingState {
            robot: cells[0],
            human: cells[1],
            robot_count: 0,
            human_count: 0,
            batteries: cells[2..].iter().copied().collect(),
            robot_return_sum: 0.0,
            human_return_sum: 0.0,
            step: 0,
        }
    }

    pub fn is_terminal(&self, state: &SharingState) -> bool {
        state.batteries.is_empty() || state.step >= self.max_steps
    }

    /// Advances one step; the human takes a random-walk action. When both
    /// agents reach the same battery a fair coin decides who gets it.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &SharingState,
        robot_action: Action,
        rng: &mut R,
    ) -> Result<(SharingState, SharingOutcome)> {
        if self.is_terminal(state) {
            return Err(Error::Terminal);
        }
        let human_action = random_walk(rng);
        let mut next = state.clone();
        next.robot = apply_move(self.spec, state.robot, robot_action);
        next.human = apply_move(self.spec, state.human, human_action);
        next.step += 1;

        let mut outcome = SharingOutcome {
            robot_reward: 0.0,
            human_reward: 0.0,
            terminal: false,
        };
        let robot_finds = next.batteries.contains(&next.robot);
        let human_finds = next.batteries.contains(&next.human);
        let contested = robot_finds && human_finds && next.robot == next.human;
        let (robot_collects, human_collects) = if contested {
            let robot_wins = rng.gen_bool(0.5);
            (robot_wins, !robot_wins)
        } else {
            (robot_finds, human_finds)
        };
        if robot_collects {
            outcome.robot_reward = diminishing_reward(next.robot_count);
            next.robot_count += 1;
            next.robot_return_sum += outcome.robot_reward;
            next.batteries.remove(&next.robot);
        }
        if human_collects {
            outcome.human_reward = diminishing_reward(next.human_count);
            next.human_count += 1;
            next.human_return_sum += outcome.human_reward;
            next.batteries.remove(&next.human);
        }
        // a contested battery is gone whoever won it
        next.batteries.remove(&next.robot);
        next.batteries.remove(&next.human);

        outcome.terminal = self.is_terminal(&next);
        Ok((next, outcome))
    }

    pub fn observe(&self, state: &SharingState) -> PerceptiveField {
        encode_field(self.spec, |p| self.cell_value(state, p), state.robot)
    }

    /// Window around the robot imagined in the human's situation: position
    /// and collected count both swap.
    pub fn observe_empathic(&self, state: &SharingState) -> PerceptiveField {
        let (imagined, center) = swap_perspective(state).expect("the human is always present");
        encode_field(self.spec, |p| self.cell_value(&imagined, p), center)
    }

    /// The observer's own count wins on a shared cell.
    fn cell_value(&self, state: &SharingState, pos: Position) -> f64 {
        if pos == state.robot {
            state.robot_count as f64 + self.agent_offset
        } else if pos == state.human {
            state.human_count as f64 + self.agent_offset
        } else if state.batteries.contains(&pos) {
            BATTERY_CELL
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FIELD_CENTER;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> SharingEnv {
        SharingEnv::new(GridSpec::new(8, 8).unwrap(), DEFAULT_MAX_STEPS, DEFAULT_BATTERIES).unwrap()
    }

    fn blank(robot: (usize, usize), human: (usize, usize), batteries: &[(usize, usize)]) -> SharingState {
        SharingState {
            robot: Position::new(robot.0, robot.1),
            human: Position::new(human.0, human.1),
            robot_count: 0,
            human_count: 0,
            batteries: batteries.iter().map(|&(r, c)| Position::new(r, c)).collect(),
            robot_return_sum: 0.0,
            human_return_sum: 0.0,
            step: 0,
        }
    }

    #[test]
    fn schedule_values() {
        assert_eq!(diminishing_reward(0), 1.0);
        assert_eq!(diminishing_reward(1), 0.9);
        assert_eq!(diminishing_reward(2), 0.8);
        assert_eq!(diminishing_reward(12), 0.0);
    }

    #[test]
    fn equality_values() {
        assert_eq!(equality(4.0, 4.0), 1.0);
        assert_eq!(equality(1.0, 0.0), 0.0);
        assert_eq!(equality(3.0, 1.0), 0.5);
        assert_eq!(equality(0.0, 0.0), 1.0);
    }

    #[test]
    fn balanced_split_maximises_group_return_and_equality() {
        let splits: Vec<(usize, f64, f64)> = (0..=9)
            .map(|k| {
                let (a, b) = (schedule_sum(k), schedule_sum(9 - k));
                (k, a + b, equality(a, b))
            })
            .collect();
        let best_total = splits.iter().map(|s| s.1).fold(f64::MIN, f64::max);
        let best_eq = splits.iter().map(|s| s.2).fold(f64::MIN, f64::max);
        for &(k, total, eq) in &splits {
            let balanced = k == 4 || k == 5;
            assert_eq!((total - best_total).abs() < 1e-12, balanced, "split {k}");
            assert_eq!((eq - best_eq).abs() < 1e-12, balanced, "split {k}");
        }
    }

    #[test]
    fn reset_layout() {
        let e = env();
        let a = e.reset(&mut ChaCha8Rng::seed_from_u64(1));
        let b = e.reset(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        let mut cells: BTreeSet<Position> = a.batteries.clone();
        cells.insert(a.robot);
        cells.insert(a.human);
        assert_eq!(cells.len(), 11);
        assert!(SharingEnv::new(GridSpec::new(3, 3).unwrap(), 10, 9).is_err());
    }

    #[test]
    fn battery_placement_is_uniform() {
        let e = env();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let mut counts = [0usize; 64];
        for _ in 0..n {
            for b in e.reset(&mut rng).batteries {
                counts[e.spec.index(b)] += 1;
            }
        }
        let p = 9.0 / 64.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 5.0 * sigma, "{c}");
        }
    }

    /// Runs one step with the human's random action pinned by searching seeds.
    fn step_with_human(e: &SharingEnv, s: &SharingState, robot: Action, human: Action) -> (SharingState, SharingOutcome) {
        for seed in 0.. {
            let mut probe = ChaCha8Rng::seed_from_u64(seed);
            if random_walk(&mut probe) == human {
                return e.step(s, robot, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            }
        }
        unreachable!()
    }

    #[test]
    fn robot_collects_first_battery() {
        let e = env();
        let s = blank((0, 0), (7, 7), &[(0, 1), (5, 5)]);
        let (next, out) = step_with_human(&e, &s, Action::Right, Action::NoOp);
        assert_eq!(out.robot_reward, 1.0);
        assert_eq!(out.human_reward, 0.0);
        assert_eq!(next.robot_count, 1);
        assert!(!next.batteries.contains(&Position::new(0, 1)));
        assert!(!out.terminal);
    }

    #[test]
    fn human_with_three_collects_point_seven() {
        let e = env();
        let mut s = blank((0, 0), (7, 6), &[(7, 7), (3, 3)]);
        s.human_count = 3;
        s.human_return_sum = schedule_sum(3);
        let (next, out) = step_with_human(&e, &s, Action::NoOp, Action::Right);
        assert_eq!(out.human_reward, diminishing_reward(3));
        assert!((out.human_reward - 0.7).abs() < 1e-12);
        assert_eq!(out.robot_reward, 0.0);
        assert_eq!(next.human_return_sum, schedule_sum(4));
    }

    #[test]
    fn last_battery_ends_the_episode() {
        let e = env();
        let s = blank((0, 0), (7, 7), &[(0, 1)]);
        let (next, out) = step_with_human(&e, &s, Action::Right, Action::NoOp);
        assert!(out.terminal);
        assert!(matches!(e.step(&next, Action::NoOp, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::Terminal)));
    }

    #[test]
    fn contested_battery_is_a_fair_coin() {
        let e = env();
        let s = blank((2, 1), (2, 3), &[(2, 2), (6, 6)]);
        let mut robot_wins = 0usize;
        let mut trials = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        while trials < 10_000 {
            let (next, _) = e.step(&s, Action::Right, &mut rng).unwrap();
            if next.human != Position::new(2, 2) {
                continue;
            }
            trials += 1;
            assert_eq!(next.robot_count + next.human_count, 1);
            assert_eq!(next.batteries.len(), 1);
            robot_wins += next.robot_count;
        }
        let sigma = (trials as f64 * 0.25).sqrt();
        assert!((robot_wins as f64 - 5000.0).abs() <= 5.0 * sigma, "{robot_wins}");
    }

    #[test]
    fn count_encoding() {
        let e = env();
        let mut s = blank((4, 4), (2, 4), &[(4, 5)]);
        let f = e.observe(&s);
        assert_eq!(f.0[FIELD_CENTER], 0.0);
        assert_eq!(f.0[2], 0.0);
        assert_eq!(f.0[13], -1.0);

        s.robot_count = 2;
        s.human_count = 5;
        let f = e.observe(&s);
        assert_eq!(f.0[FIELD_CENTER], 2.0);
        assert_eq!(f.0[2], 5.0);

        // imagined learner at (2, 4) holding 5; imagined human at (4, 4) holding 2
        let emp = e.observe_empathic(&s);
        assert_eq!(emp.0[FIELD_CENTER], 5.0);
        assert_eq!(emp.0[22], 2.0);
        // the battery at (4, 5) sits two rows down, one column right
        assert_eq!(emp.0[23], -1.0);

        let shifted = e.with_agent_offset(0.5).observe(&s);
        assert_eq!(shifted.0[FIELD_CENTER], 2.5);
    }

    proptest! {
        #[test]
        fn conservation_and_return_sums(seed: u64, moves in proptest::collection::vec(0usize..5, 1..300)) {
            let e = env();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = e.reset(&mut rng);
            for m in moves {
                if e.is_terminal(&s) {
                    break;
                }
                let (next, out) = e.step(&s, Action::from_index(m).unwrap(), &mut rng).unwrap();
                s = next;
                prop_assert_eq!(s.robot_count + s.human_count + s.batteries.len(), DEFAULT_BATTERIES);
                prop_assert_eq!(s.robot_return_sum, schedule_sum(s.robot_count));
                prop_assert_eq!(s.human_return_sum, schedule_sum(s.human_count));
                prop_assert!(!s.batteries.contains(&s.robot) && !s.batteries.contains(&s.human));
                prop_assert_eq!(out.terminal, e.is_terminal(&s));
                let eq = s.equality();
                prop_assert!((0.0..=1.0).contains(&eq));
            }
        }

        #[test]
        fn equality_is_symmetric_and_bounded(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let e = equality(a, b);
            prop_assert!((0.0..=1.0).contains(&e));
            prop_assert_eq!(e, equality(b, a));
        }
    }
}
