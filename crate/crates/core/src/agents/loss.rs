use crate::agents::rewards::{al_modified_reward, sail_modified_reward, strsil_modified_reward, td_target};
use crate::agents::{AgentConfig, LossVariant, QFunction};
use crate::error::{Error, Result};
use crate::mdp::max_value;
use crate::replay::TransitionRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// Batch mean of `(target - Q(s, a))^2 / 2`.
    pub loss: f64,
    /// Gradient of `loss` with respect to the online parameters.
    pub grad: Vec<f64>,
    /// Batch mean of `|r_mod - r|`.
    pub mean_abs_bonus: f64,
    /// Fraction of the batch whose stored return exceeds `max_a Q_target(s, a)`.
    pub stale_fraction: f64,
}

/// Scalar part of [`LossOutput`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub mean_abs_bonus: f64,
    pub stale_fraction: f64,
}

/// Reward seen by the TD target for one record, computed from target-network values.
pub fn modified_reward(
    record: &TransitionRecord,
    target_q: &[f64],
    config: &AgentConfig,
) -> Result<f64> {
    let q_sa = target_q[record.action];
    let q_max = max_value(target_q);
    let g = || {
        record
            .mc_return
            .ok_or_else(|| Error::Consistency("batch contains a record with a pending return".into()))
    };
    let (r, alpha, clip) = (record.reward, config.alpha, config.bonus_clip);
    match config.loss_variant {
        LossVariant::Dqn => Ok(r),
        LossVariant::Al => al_modified_reward(r, q_sa, q_max, alpha, clip),
        LossVariant::StrSil => Ok(strsil_modified_reward(r, g()?, q_max, alpha, clip)),
        LossVariant::Sail => sail_modified_reward(r, g()?, q_sa, q_max, alpha, clip),
    }
}

/// Squared TD loss of the online function against a frozen target, with the
/// whole target held constant.
pub fn loss_and_grad(
    online: &QFunction,
    target: &QFunction,
    batch: &[TransitionRecord],
    config: &AgentConfig,
) -> Result<LossOutput> {
    let mut grad = vec![0.0; online.params().len()];
    let stats = loss_and_grad_into(online, target, batch, config, &mut grad)?;
    Ok(LossOutput { loss: stats.loss, grad, mean_abs_bonus: stats.mean_abs_bonus, stale_fraction: stats.stale_fraction })
}

/// Same as [`loss_and_grad`], overwriting a caller-owned gradient buffer.
pub fn loss_and_grad_into(
    online: &QFunction,
    target: &QFunction,
    batch: &[TransitionRecord],
    config: &AgentConfig,
    grad: &mut [f64],
) -> Result<LossStats> {
    if grad.len() != online.params().len() {
        return Err(Error::Usage("gradient buffer does not match the parameter count".into()));
    }
    grad.fill(0.0);
    if batch.is_empty() {
        return Ok(LossStats { loss: 0.0, mean_abs_bonus: 0.0, stale_fraction: 0.0 });
    }
    let n = batch.len() as f64;
    let mut target_row = vec![0.0; target.n_actions()];
    let mut online_row = vec![0.0; online.n_actions()];
    let (mut loss, mut bonus, mut above) = (0.0, 0.0, 0usize);
    for record in batch {
        let Some(g) = record.mc_return else {
            return Err(Error::Consistency("batch contains a record with a pending return".into()));
        };
        target.q_values_into(record.state, &mut target_row);
        above += (g > max_value(&target_row)) as usize;
        let r_mod = modified_reward(record, &target_row, config)?;
        bonus += (r_mod - record.reward).abs();

        let next_max = if record.done {
            0.0
        } else {
            target.q_values_into(record.next_state, &mut target_row);
            max_value(&target_row)
        };
        let y = td_target(r_mod, config.gamma, next_max, record.done);

        online.q_values_into(record.state, &mut online_row);
        let err = y - online_row[record.action];
        loss += 0.5 * err * err;
        online.accumulate_grad(record.state, record.action, -err / n, grad);
    }
    Ok(LossStats { loss: loss / n, mean_abs_bonus: bonus / n, stale_fraction: above as f64 / n })
}
