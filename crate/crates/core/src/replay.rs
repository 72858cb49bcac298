//! Fixed-capacity FIFO replay memory with uniform sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{PerceptiveField, NUM_ACTIONS};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: PerceptiveField,
    pub action: usize,
    pub reward: f64,
    pub next_state: PerceptiveField,
    pub empathic_next_state: PerceptiveField,
    /// The learner's episode ended with this step.
    pub terminal: bool,
    /// The counterpart was harmed on this step, so the imagined successor
    /// (the learner in the counterpart's situation) is itself terminal.
    pub empathic_terminal: bool,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        if self.action >= NUM_ACTIONS {
            return Err(Error::InvalidArgument(format!(
                "transition action {} out of range",
                self.action
            )));
        }
        let finite = self.reward.is_finite()
            && self.state.is_finite()
            && self.next_state.is_finite()
            && self.empathic_next_state.is_finite();
        if !finite {
            return Err(Error::NonFinite("transition"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: Vec<Transition>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            buffer: Vec::new(),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Stores a transition, evicting the oldest once full.
    pub fn push(&mut self, transition: Transition) -> Result<()> {
        transition.validate()?;
        if self.buffer.len() < self.capacity {
            self.buffer.push(transition);
        } else {
            self.buffer[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> + '_ {
        let split = if self.buffer.len() < self.capacity { 0 } else { self.cursor };
        self.buffer[split..].iter().chain(&self.buffer[..split])
    }

    pub fn oldest(&self) -> Option<&Transition> {
        self.iter().next()
    }

    /// Uniform draw with replacement. Fails with [`Error::NotWarm`] when fewer
    /// than `batch_size` transitions are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.buffer.len() < batch_size {
            return Err(Error::NotWarm {
                size: self.buffer.len(),
                required: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.buffer[rng.gen_range(0..self.buffer.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tagged(tag: f64) -> Transition {
        Transition {
            state: PerceptiveField::default(),
            action: 0,
            reward: tag,
            next_state: PerceptiveField::default(),
            empathic_next_state: PerceptiveField::default(),
            terminal: false,
            empathic_terminal: false,
        }
    }

    fn tags(m: &ReplayMemory) -> Vec<f64> {
        m.iter().map(|t| t.reward).collect()
    }

    #[test]
    fn ring_eviction() {
        let mut m = ReplayMemory::new(2).unwrap();
        for t in [1.0, 2.0, 3.0] {
            m.push(tagged(t)).unwrap();
        }
        assert_eq!(tags(&m), vec![2.0, 3.0]);
    }

    #[test]
    fn fill_phase() {
        let mut m = ReplayMemory::new(3).unwrap();
        m.push(tagged(1.0)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.oldest().unwrap().reward, 1.0);
    }

    #[test]
    fn rejects_invalid_transitions() {
        let mut m = ReplayMemory::new(3).unwrap();
        let mut bad = tagged(1.0);
        bad.action = 5;
        assert!(m.push(bad).is_err());
        let mut bad = tagged(f64::NAN);
        bad.action = 1;
        assert!(m.push(bad).is_err());
        let mut bad = tagged(0.0);
        bad.empathic_next_state.0[3] = f64::INFINITY;
        assert!(m.push(bad).is_err());
        assert!(m.is_empty());
        assert!(ReplayMemory::new(0).is_err());
    }

    #[test]
    fn not_warm_until_batch_fits() {
        let mut m = ReplayMemory::new(10).unwrap();
        m.push(tagged(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(m.sample(3, &mut rng), Err(Error::NotWarm { size: 1, required: 3 })));
    }

    #[test]
    fn single_record_sampled_with_replacement() {
        let mut m = ReplayMemory::new(10).unwrap();
        m.push(tagged(4.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = m.sample(1, &mut rng).unwrap();
        assert_eq!(batch.len(), 1);
        // warm threshold lowered to one record
        let batch: Vec<_> = (0..4).flat_map(|_| m.sample(1, &mut rng).unwrap()).collect();
        assert!(batch.iter().all(|t| t.reward == 4.0));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut m = ReplayMemory::new(4).unwrap();
        for t in 0..4 {
            m.push(tagged(t as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n / 4 {
            for t in m.sample(4, &mut rng).unwrap() {
                counts[t.reward as usize] += 1;
            }
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 2500.0).abs() <= 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn ten_times_capacity_keeps_the_tail() {
        let cap = 7;
        let mut m = ReplayMemory::new(cap).unwrap();
        let all: Vec<f64> = (0..10 * cap).map(|i| i as f64).collect();
        for &t in &all {
            m.push(tagged(t)).unwrap();
        }
        assert_eq!(m.len(), cap);
        assert_eq!(tags(&m), all[all.len() - cap..].to_vec());
    }

    proptest! {
        #[test]
        fn fifo_matches_truncating_list(cap in 1usize..40, n in 0usize..10_000) {
            let mut m = ReplayMemory::new(cap).unwrap();
            let mut oracle: Vec<f64> = Vec::new();
            for i in 0..n {
                m.push(tagged(i as f64)).unwrap();
                oracle.push(i as f64);
                if oracle.len() > cap {
                    oracle.remove(0);
                }
            }
            prop_assert_eq!(tags(&m), oracle);
        }

        #[test]
        fn sampling_is_pure_and_seeded(cap in 1usize..30, n in 1usize..60, seed: u64, batch in 1usize..8) {
            let mut m = ReplayMemory::new(cap).unwrap();
            for i in 0..n {
                m.push(tagged(i as f64)).unwrap();
            }
            prop_assume!(m.len() >= batch);
            let before = tags(&m);
            let a: Vec<f64> = m.sample(batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().iter().map(|t| t.reward).collect();
            let b: Vec<f64> = m.sample(batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().iter().map(|t| t.reward).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(tags(&m), before);
        }
    }
}
