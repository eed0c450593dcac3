//! Reward modifications for the four loss variants and the TD target.
//!
//! `q_sa` and `q_max` are target-network values at `(s, a)` and `max_a Q(s, a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CONSISTENCY_TOL: f64 = 1e-9;

/// Bounds applied to the bonus term only; the base reward is never clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clip {
    pub low: f64,
    pub high: f64,
}

impl Default for Clip {
    fn default() -> Self {
        Self { low: -1.0, high: 1.0 }
    }
}

impl Clip {
    /// No clipping.
    pub const NONE: Clip = Clip { low: f64::NEG_INFINITY, high: f64::INFINITY };

    pub fn validate(&self) -> Result<()> {
        if self.low <= 0.0 && 0.0 <= self.high {
            Ok(())
        } else {
            Err(Error::Config(format!("bonus clip [{}, {}] must contain 0", self.low, self.high)))
        }
    }

    pub fn apply(&self, bonus: f64) -> f64 {
        bonus.clamp(self.low, self.high)
    }
}

fn check_order(q_sa: f64, q_max: f64) -> Result<()> {
    if q_sa > q_max + CONSISTENCY_TOL {
        return Err(Error::Consistency(format!("Q(s,a) = {q_sa} exceeds max_a Q(s,a) = {q_max}")));
    }
    Ok(())
}

// A zero bonus leaves `r` untouched, including the sign of a zero reward.
fn with_bonus(r: f64, bonus: f64) -> f64 {
    if bonus == 0.0 {
        r
    } else {
        r + bonus
    }
}

/// `r + clip(alpha (max(G, Q(s,a)) - max_a Q(s,a)))`.
pub fn sail_modified_reward(r: f64, g: f64, q_sa: f64, q_max: f64, alpha: f64, clip: Clip) -> Result<f64> {
    check_order(q_sa, q_max)?;
    Ok(with_bonus(r, clip.apply(alpha * (g.max(q_sa) - q_max))))
}

/// `r + clip(alpha (Q(s,a) - max_a Q(s,a)))`.
pub fn al_modified_reward(r: f64, q_sa: f64, q_max: f64, alpha: f64, clip: Clip) -> Result<f64> {
    check_order(q_sa, q_max)?;
    Ok(with_bonus(r, clip.apply(alpha * (q_sa - q_max))))
}

/// `r + clip(alpha max(0, G - max_a Q(s,a)))`.
pub fn strsil_modified_reward(r: f64, g: f64, q_max: f64, alpha: f64, clip: Clip) -> f64 {
    with_bonus(r, clip.apply(alpha * (g - q_max).max(0.0)))
}

/// `r_mod + gamma * max_a Q_target(s', a)`, or `r_mod` at a terminal transition.
pub fn td_target(r_mod: f64, gamma: f64, q_target_next_max: f64, done: bool) -> f64 {
    if done {
        r_mod
    } else {
        r_mod + gamma * q_target_next_max
    }
}
