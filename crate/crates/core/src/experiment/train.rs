use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::agents::{epsilon_greedy, Agent};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::experiment::RunConfig;
use crate::metrics::{emit_csv, mean_action_gap, EvalRow};
use crate::replay::{EpisodeEnd, ReplayBuffer, TransitionRecord};
use crate::rng::{self, label};

/// Everything recorded for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub method: String,
    pub env: String,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
    /// Mean `|r_mod - r|` over the updates of each eval interval, aligned with `rows`.
    pub mean_bonus: Vec<Option<f64>>,
    /// Set when the run was aborted; `rows` holds what was recorded before.
    pub failure: Option<String>,
}

impl RunOutcome {
    pub fn final_return(&self) -> Option<f64> {
        self.rows.last().map(|r| r.eval_return)
    }

    pub fn csv_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}_{}_seed{}.csv", self.method, self.env, self.seed))
    }
}

#[derive(Default)]
struct IntervalStats {
    updates: usize,
    loss: f64,
    bonus: f64,
    stale: f64,
}

/// Mean undiscounted return of `episodes` epsilon-greedy episodes. Each call
/// replays the same seed sequence.
fn evaluate<E: Environment>(agent: &Agent, env: &mut E, episodes: usize, epsilon: f64, seed: u64) -> Result<f64> {
    let mut rng = rng::stream(seed, label::EVAL);
    let mut total = 0.0;
    let mut q = vec![0.0; env.n_actions()];
    for _ in 0..episodes {
        let mut state = env.reset(rng.random());
        loop {
            agent.online().q_values_into(state, &mut q);
            let step = env.step(epsilon_greedy(&q, epsilon, &mut rng))?;
            total += step.reward;
            if step.done {
                break;
            }
            state = step.next_observation;
        }
    }
    Ok(total / episodes as f64)
}

/// Trains one seed: one environment step, store, backfill returns at episode
/// end, then one gradient update per step once enough finalized records exist.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let mut env = config.env.build()?;
    let mut eval_env = config.env.build()?;
    let agent_cfg = &config.agent;
    let settings = &config.run;

    let mut env_rng = rng::stream(seed, label::ENV);
    let mut explore_rng = rng::stream(seed, label::EXPLORE);
    let mut replay_rng = rng::stream(seed, label::REPLAY);
    let mut agent = Agent::new(agent_cfg.clone(), env.n_states(), env.n_actions(), &mut rng::stream(seed, label::INIT))?;
    let mut buffer = ReplayBuffer::new(agent_cfg.replay_capacity)?;

    let mut outcome = RunOutcome {
        method: config.method(),
        env: config.env_name().to_string(),
        seed,
        rows: Vec::new(),
        mean_bonus: Vec::new(),
        failure: None,
    };

    let mut episode_id = 0u64;
    let mut t = 0usize;
    let mut state = env.reset(env_rng.random());
    let mut stats = IntervalStats::default();
    let mut last_batch: Vec<TransitionRecord> = Vec::new();

    for step in 1..=settings.steps {
        let epsilon = agent_cfg.epsilon.value(step - 1);
        let action = agent.act(state, epsilon, &mut explore_rng);
        let result = env.step(action)?;
        let terminal = result.done && !result.truncated;
        buffer.store(TransitionRecord::pending(
            state,
            action,
            result.reward,
            result.next_observation,
            terminal,
            episode_id,
            t,
        ))?;
        t += 1;
        if result.done {
            let end = if terminal { EpisodeEnd::Terminal } else { EpisodeEnd::Truncated };
            buffer.finalize_episode(agent_cfg.gamma, end)?;
            episode_id += 1;
            t = 0;
            state = env.reset(env_rng.random());
        } else {
            state = result.next_observation;
        }

        if buffer.finalized_len() >= agent_cfg.warmup {
            if let Some(batch) = buffer.sample_uniform(agent_cfg.batch_size, &mut replay_rng) {
                match agent.update(&batch) {
                    Ok(out) => {
                        stats.updates += 1;
                        stats.loss += out.loss;
                        stats.bonus += out.mean_abs_bonus;
                        stats.stale += out.stale_fraction;
                        last_batch = batch;
                    }
                    Err(e @ Error::Numerical(_)) => {
                        outcome.failure = Some(format!("step {step}: {e}"));
                        return Ok(outcome);
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        if step % agent_cfg.target_sync_period == 0 {
            agent.sync_target();
        }

        if step % settings.eval_every == 0 || step == settings.steps {
            let eval_return = evaluate(&agent, &mut eval_env, settings.eval_episodes, settings.eval_epsilon, seed)?;
            let (loss, bonus, stale) = if stats.updates > 0 {
                let n = stats.updates as f64;
                (Some(stats.loss / n), Some(stats.bonus / n), Some(stats.stale / n))
            } else {
                (None, None, None)
            };
            let states: Vec<usize> = last_batch.iter().map(|r| r.state).collect();
            outcome.rows.push(EvalRow {
                method: outcome.method.clone(),
                env: outcome.env.clone(),
                seed,
                step,
                eval_return,
                mean_action_gap: (!states.is_empty()).then(|| mean_action_gap(agent.online(), &states)),
                stale_fraction: stale,
                loss,
            });
            outcome.mean_bonus.push(bonus);
            stats = IntervalStats::default();
        }
    }
    Ok(outcome)
}

/// Runs every seed of `config` on a pool of `config.workers()` threads and
/// writes one CSV per seed into the output directory.
pub fn train(config: &RunConfig) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let jobs: Vec<(RunConfig, u64)> = config.run.seeds.iter().map(|&s| (config.clone(), s)).collect();
    let outcomes = crate::experiment::run_jobs(&jobs, config.workers())?;
    write_outcomes(&outcomes, &config.run.out)?;
    Ok(outcomes)
}

pub fn write_outcomes(outcomes: &[RunOutcome], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for outcome in outcomes {
        emit_csv(&outcome.rows, outcome.csv_path(dir))?;
    }
    Ok(())
}
