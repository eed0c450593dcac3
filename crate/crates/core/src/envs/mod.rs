//! Small discrete environments with sparse rewards.

pub mod chain;
pub mod key_door;
mod sticky;

pub use chain::SparseChain;
pub use key_door::{GridMap, KeyDoorConfig, KeyDoorTreasure, DEFAULT_MAP};
pub use sticky::StickyWrapper;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of one environment transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub next_observation: usize,
    pub reward: f64,
    /// The episode is over; call `reset` before stepping again.
    pub done: bool,
    /// The episode ended because of the step limit rather than a terminal state.
    pub truncated: bool,
    /// Steps taken in the current episode, including this one.
    pub step_count: usize,
}

/// A discrete environment with integer state ids.
pub trait Environment: Send {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;

    /// Restores the initial layout, reseeds any internal randomness and
    /// returns the initial state id.
    fn reset(&mut self, seed: u64) -> usize;

    fn step(&mut self, action: usize) -> Result<EnvStep>;

    /// Action taken by a shortest-path planner from the current configuration.
    fn planner_action(&self) -> usize;

    /// Largest undiscounted episode return the environment allows.
    fn max_return(&self) -> f64;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn n_states(&self) -> usize {
        (**self).n_states()
    }
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }
    fn reset(&mut self, seed: u64) -> usize {
        (**self).reset(seed)
    }
    fn step(&mut self, action: usize) -> Result<EnvStep> {
        (**self).step(action)
    }
    fn planner_action(&self) -> usize {
        (**self).planner_action()
    }
    fn max_return(&self) -> f64 {
        (**self).max_return()
    }
}

/// Environment selection as it appears in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    #[serde(default = "EnvSpec::default_name")]
    pub name: String,
    /// Probability of repeating the previous action.
    #[serde(default = "EnvSpec::default_sticky")]
    pub sticky: f64,
    /// ASCII map override for the key-door-treasure grid.
    #[serde(default)]
    pub map: Option<std::path::PathBuf>,
    #[serde(default)]
    pub step_limit: Option<usize>,
    /// Corridor length for the sparse chain.
    #[serde(default)]
    pub length: Option<usize>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self { name: Self::default_name(), sticky: Self::default_sticky(), map: None, step_limit: None, length: None }
    }
}

impl EnvSpec {
    pub const KEY_DOOR_TREASURE: &'static str = "key_door_treasure";
    pub const SPARSE_CHAIN: &'static str = "sparse_chain";

    fn default_name() -> String {
        Self::KEY_DOOR_TREASURE.to_string()
    }

    fn default_sticky() -> f64 {
        0.25
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sticky) {
            return Err(Error::Config(format!("sticky probability must lie in [0, 1], got {}", self.sticky)));
        }
        if self.step_limit == Some(0) || self.length == Some(0) {
            return Err(Error::Config("step_limit and length must be positive".into()));
        }
        match self.name.as_str() {
            Self::KEY_DOOR_TREASURE | Self::SPARSE_CHAIN => Ok(()),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }

    /// Instantiates the environment, wrapped in a sticky-action layer.
    pub fn build(&self) -> Result<StickyWrapper<Box<dyn Environment>>> {
        self.validate()?;
        let inner: Box<dyn Environment> = match self.name.as_str() {
            Self::KEY_DOOR_TREASURE => {
                let map = match &self.map {
                    Some(path) => GridMap::load(path)?,
                    None => GridMap::default_map(),
                };
                let mut config = KeyDoorConfig::default();
                if let Some(limit) = self.step_limit {
                    config.step_limit = limit;
                }
                Box::new(KeyDoorTreasure::new(map, config))
            }
            _ => {
                let mut env = SparseChain::default();
                if let Some(length) = self.length {
                    env = SparseChain::new(length, env.step_limit());
                }
                if let Some(limit) = self.step_limit {
                    env = SparseChain::new(env.length(), limit);
                }
                Box::new(env)
            }
        };
        StickyWrapper::new(inner, self.sticky)
    }
}
