//! Self-imitation advantage learning (SAIL) and its baselines at desk scale.
//!
//! * [`mdp`]: exact tabular operators and the value-iteration oracle.
//! * [`envs`]: key-door-treasure grid, sparse chain, sticky-action wrapper.
//! * [`replay`]: episodic replay with Monte-Carlo return backfill.
//! * [`agents`]: Q-functions, reward modifications, losses and optimizers.
//! * [`metrics`]: relative improvement, normalized median, gap and staleness diagnostics.
//! * [`experiment`]: seeded training runs and sweeps.

pub mod agents;
pub mod envs;
mod error;
pub mod experiment;
pub mod mdp;
pub mod metrics;
pub mod replay;
pub mod rng;

pub use agents::{Agent, AgentConfig, Clip, LossVariant, QFunction, Representation};
pub use envs::{EnvSpec, EnvStep, Environment};
pub use error::{Error, Result};
pub use experiment::{RunConfig, RunOutcome};
pub use mdp::{QTable, TabularMdp, Trajectory};
pub use metrics::{BaselineAnchors, EvalRow, RunRecord, SummaryRow};
pub use replay::{EpisodeEnd, ReplayBuffer, TransitionRecord};
