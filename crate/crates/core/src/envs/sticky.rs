use rand::{Rng as _, SeedableRng};

use crate::envs::{EnvStep, Environment};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Sticky actions: with probability `p` the previously executed action is
/// executed in place of the requested one. The first step of every episode
/// executes the requested action.
#[derive(Debug, Clone)]
pub struct StickyWrapper<E> {
    inner: E,
    repeat_probability: f64,
    last_action: Option<usize>,
    last_repeated: bool,
    rng: Rng,
}

impl<E: Environment> StickyWrapper<E> {
    pub fn new(inner: E, repeat_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&repeat_probability) {
            return Err(Error::Config(format!(
                "repeat probability must lie in [0, 1], got {repeat_probability}"
            )));
        }
        Ok(Self { inner, repeat_probability, last_action: None, last_repeated: false, rng: Rng::seed_from_u64(0) })
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn repeat_probability(&self) -> f64 {
        self.repeat_probability
    }

    /// Whether the last step executed the previous action instead of the requested one.
    pub fn last_step_repeated(&self) -> bool {
        self.last_repeated
    }

    pub fn last_action(&self) -> Option<usize> {
        self.last_action
    }
}

impl<E: Environment> Environment for StickyWrapper<E> {
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    fn reset(&mut self, seed: u64) -> usize {
        self.rng = Rng::seed_from_u64(seed);
        self.last_action = None;
        self.last_repeated = false;
        self.inner.reset(seed)
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        // The coin is drawn on every non-initial step so the stream position
        // does not depend on p.
        let executed = match self.last_action {
            Some(previous) => {
                self.last_repeated = self.rng.random::<f64>() < self.repeat_probability;
                if self.last_repeated { previous } else { action }
            }
            None => {
                self.last_repeated = false;
                action
            }
        };
        let step = self.inner.step(executed)?;
        self.last_action = Some(executed);
        Ok(step)
    }

    fn planner_action(&self) -> usize {
        self.inner.planner_action()
    }

    fn max_return(&self) -> f64 {
        self.inner.max_return()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{KeyDoorTreasure, SparseChain};

    fn trace<E: Environment>(env: &mut E, seed: u64, actions: &[usize]) -> Vec<EnvStep> {
        env.reset(seed);
        let mut out = Vec::new();
        for &a in actions {
            let step = env.step(a).unwrap();
            out.push(step);
            if step.done {
                env.reset(seed);
            }
        }
        out
    }

    #[test]
    fn zero_probability_is_transparent() {
        let actions: Vec<usize> = (0..500).map(|i| (i * 7 + i / 3) % 4).collect();
        let mut plain = KeyDoorTreasure::default();
        let mut sticky = StickyWrapper::new(KeyDoorTreasure::default(), 0.0).unwrap();
        assert_eq!(trace(&mut plain, 3, &actions), trace(&mut sticky, 3, &actions));
    }

    #[test]
    fn unit_probability_repeats_the_first_action() {
        let mut env = StickyWrapper::new(SparseChain::new(50, 100), 1.0).unwrap();
        env.reset(1);
        env.step(1).unwrap();
        for _ in 0..20 {
            env.step(0).unwrap();
            assert!(env.last_step_repeated());
            assert_eq!(env.last_action(), Some(1));
        }
    }

    #[test]
    fn first_step_of_each_episode_is_not_repeated() {
        let mut env = StickyWrapper::new(SparseChain::new(3, 3), 1.0).unwrap();
        for episode in 0..5 {
            env.reset(episode);
            let step = env.step(episode as usize % 2).unwrap();
            assert!(!env.last_step_repeated());
            assert_eq!(step.step_count, 1);
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let actions: Vec<usize> = (0..300).map(|i| i % 2).collect();
        let mut a = StickyWrapper::new(SparseChain::new(40, 1000), 0.5).unwrap();
        let mut b = StickyWrapper::new(SparseChain::new(40, 1000), 0.5).unwrap();
        assert_eq!(trace(&mut a, 9, &actions), trace(&mut b, 9, &actions));
    }

    fn repeat_flags(seed: u64, n: usize) -> Vec<bool> {
        let mut env = StickyWrapper::new(SparseChain::new(1_000_000, 1_000_000), 0.5).unwrap();
        env.reset(seed);
        env.step(0).unwrap();
        (0..n)
            .map(|i| {
                env.step(i % 2).unwrap();
                env.last_step_repeated()
            })
            .collect()
    }

    #[test]
    fn distinct_seeds_give_distinct_draws() {
        // Chi-square test of independence on the 2x2 table of paired repeat flags;
        // 10.83 is the 0.1% critical value with one degree of freedom.
        let n = 10_000;
        let (x, y) = (repeat_flags(1, n), repeat_flags(2, n));
        assert_ne!(x, y);
        let mut table = [[0.0f64; 2]; 2];
        for (a, b) in x.iter().zip(&y) {
            table[*a as usize][*b as usize] += 1.0;
        }
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expected = rows[i] * cols[j] / n as f64;
                chi2 += (table[i][j] - expected).powi(2) / expected;
            }
        }
        assert!(chi2 < 10.83, "paired draws look dependent: chi2 = {chi2}");
    }

    #[test]
    fn repeat_frequency_matches_probability() {
        let n = 100_000;
        let mut env = StickyWrapper::new(KeyDoorTreasure::default(), 0.25).unwrap();
        env.reset(5);
        let (mut draws, mut repeats) = (0usize, 0usize);
        let mut first = true;
        for i in 0..n {
            let step = env.step(i % 2).unwrap();
            if !first {
                draws += 1;
                repeats += env.last_step_repeated() as usize;
            }
            first = false;
            if step.done {
                env.reset(5 + i as u64);
                first = true;
            }
        }
        let freq = repeats as f64 / draws as f64;
        assert!((0.23..=0.27).contains(&freq), "frequency {freq}");
    }
}
