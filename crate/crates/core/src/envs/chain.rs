use crate::envs::{EnvStep, Environment};
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// A corridor of `length` cells. `right` advances one cell, `left` sends the
/// agent back to the start, and reaching the far end pays 1 and terminates.
/// The only rewarding behaviour is `length` consecutive `right` actions.
#[derive(Debug, Clone)]
pub struct SparseChain {
    length: usize,
    step_limit: usize,
    position: usize,
    steps: usize,
    done: bool,
}

impl Default for SparseChain {
    fn default() -> Self {
        Self::new(20, 60)
    }
}

impl SparseChain {
    pub fn new(length: usize, step_limit: usize) -> Self {
        assert!(length > 0 && step_limit > 0);
        Self { length, step_limit, position: 0, steps: 0, done: false }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn step_limit(&self) -> usize {
        self.step_limit
    }
}

impl Environment for SparseChain {
    fn n_states(&self) -> usize {
        self.length + 1
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: u64) -> usize {
        self.position = 0;
        self.steps = 0;
        self.done = false;
        0
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; reset first".into()));
        }
        if action >= 2 {
            return Err(Error::Usage(format!("action {action} out of range for a 2-action chain")));
        }
        self.steps += 1;
        self.position = if action == RIGHT { self.position + 1 } else { 0 };
        let reached = self.position == self.length;
        let truncated = !reached && self.steps >= self.step_limit;
        self.done = reached || truncated;
        Ok(EnvStep {
            next_observation: self.position,
            reward: if reached { 1.0 } else { 0.0 },
            done: self.done,
            truncated,
            step_count: self.steps,
        })
    }

    fn planner_action(&self) -> usize {
        RIGHT
    }

    fn max_return(&self) -> f64 {
        1.0
    }
}
