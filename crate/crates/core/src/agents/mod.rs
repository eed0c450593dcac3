//! Value-based learners: Q-function approximators with frozen target copies,
//! epsilon-greedy acting, and the DQN / AL / straightforward-SIL / SAIL losses.

pub mod checkpoint;
mod loss;
mod optim;
mod qfunction;
pub mod rewards;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use loss::{loss_and_grad, loss_and_grad_into, modified_reward, LossOutput, LossStats};
pub use optim::{Optimizer, OptimizerKind};
pub use qfunction::{QFunction, Representation};
pub use rewards::Clip;

use crate::error::{Error, Result};
use crate::mdp::argmax;
use crate::replay::TransitionRecord;

/// Which reward modification feeds the TD target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    /// Unmodified reward.
    Dqn,
    /// Advantage learning.
    Al,
    /// Rectified return-over-value bonus.
    #[serde(rename = "strsil")]
    StrSil,
    /// Self-imitation advantage learning.
    Sail,
}

impl LossVariant {
    pub const ALL: [LossVariant; 4] = [LossVariant::Dqn, LossVariant::Al, LossVariant::StrSil, LossVariant::Sail];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Dqn => "dqn",
            LossVariant::Al => "al",
            LossVariant::StrSil => "strsil",
            LossVariant::Sail => "sail",
        }
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown loss variant `{s}` (expected dqn, al, strsil or sail)")))
    }
}

/// Linear annealing from `start` to `end` over `decay_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, decay_steps: 20_000 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 {
            return self.end;
        }
        let frac = (step as f64 / self.decay_steps as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// Learning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub target_sync_period: u64,
    pub bonus_clip: Clip,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss_variant: LossVariant,
    pub optimizer: OptimizerKind,
    pub representation: Representation,
    pub hidden: usize,
    pub replay_capacity: usize,
    /// Finalized records required before the first update.
    pub warmup: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            gamma: 0.99,
            epsilon: EpsilonSchedule::default(),
            target_sync_period: 500,
            bonus_clip: Clip::default(),
            learning_rate: 5e-4,
            batch_size: 32,
            loss_variant: LossVariant::Sail,
            optimizer: OptimizerKind::Adam,
            representation: Representation::Mlp,
            hidden: 64,
            replay_capacity: crate::replay::DEFAULT_CAPACITY,
            warmup: 1_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return fail("epsilon values must lie in [0, 1]".into());
        }
        if self.target_sync_period == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return fail("target_sync_period, batch_size and replay_capacity must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.representation == Representation::Mlp && self.hidden == 0 {
            return fail("hidden width must be positive".into());
        }
        self.bonus_clip.validate()
    }
}

/// Uniform random action with probability `epsilon`, else the greedy action
/// (lowest index on ties). Always consumes one uniform draw, plus one more
/// when exploring.
pub fn epsilon_greedy(q_values: &[f64], epsilon: f64, rng: &mut impl rand::Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Copies the online parameters into the target.
pub fn sync_target(online: &QFunction, target: &mut QFunction) {
    target.copy_from(online);
}

/// An online Q-function, its target copy and optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    online: QFunction,
    target: QFunction,
    optimizer: Optimizer,
    grad: Vec<f64>,
}

impl Agent {
    /// Online and target start from the same initialization.
    pub fn new(config: AgentConfig, n_states: usize, n_actions: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        config.validate()?;
        let online = QFunction::init(config.representation, n_states, n_actions, config.hidden, rng)?;
        let target = online.clone();
        let n_params = online.params().len();
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate, n_params);
        Ok(Self { config, online, target, optimizer, grad: vec![0.0; n_params] })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QFunction {
        &self.online
    }

    pub fn target(&self) -> &QFunction {
        &self.target
    }

    pub fn act(&self, state: usize, epsilon: f64, rng: &mut impl rand::Rng) -> usize {
        epsilon_greedy(&self.online.q_values(state), epsilon, rng)
    }

    /// One gradient step on `batch`.
    pub fn update(&mut self, batch: &[TransitionRecord]) -> Result<LossStats> {
        let stats = loss_and_grad_into(&self.online, &self.target, batch, &self.config, &mut self.grad)?;
        if !stats.loss.is_finite() {
            return Err(Error::Numerical(format!("loss is {}", stats.loss)));
        }
        self.optimizer.step(self.online.params_mut(), &self.grad)?;
        Ok(stats)
    }

    pub fn sync_target(&mut self) {
        sync_target(&self.online, &mut self.target);
    }
}
