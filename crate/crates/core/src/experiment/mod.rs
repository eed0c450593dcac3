//! Seeded training runs, sweeps and baseline anchors.

mod config;
mod train;

pub use config::{RunConfig, RunSettings};
pub use train::{run_seed, train, write_outcomes, RunOutcome};

use rand::Rng as _;
use rayon::prelude::*;

use crate::agents::LossVariant;
use crate::envs::{EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::metrics::{emit_summary, summarize, RunRecord, SummaryRow, DEFAULT_IMPROVEMENT_EPS};
use crate::rng::{self, label};

/// Runs `(config, seed)` jobs on a bounded thread pool; results keep job order.
pub fn run_jobs(jobs: &[(RunConfig, u64)], workers: usize) -> Result<Vec<RunOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|(config, seed)| run_seed(config, *seed)).collect())
}

/// The dimension a sweep varies.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Variant(Vec<LossVariant>),
    Stickiness(Vec<f64>),
    Alpha(Vec<f64>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Variant(v) => v.len(),
            SweepAxis::Stickiness(v) | SweepAxis::Alpha(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One labelled config per axis value.
    pub fn expand(&self, base: &RunConfig) -> Result<Vec<RunConfig>> {
        if self.is_empty() {
            return Err(Error::Usage("sweep axis has no values".into()));
        }
        let with = |label: String, edit: &dyn Fn(&mut RunConfig)| {
            let mut c = base.clone();
            edit(&mut c);
            c.run.label = Some(label);
            c
        };
        let configs: Vec<RunConfig> = match self {
            SweepAxis::Variant(vs) => vs
                .iter()
                .map(|&v| with(v.name().to_string(), &|c| c.agent.loss_variant = v))
                .collect(),
            SweepAxis::Stickiness(ps) => ps
                .iter()
                .map(|&p| with(format!("{}_p{p}", base.agent.loss_variant), &|c| c.env.sticky = p))
                .collect(),
            SweepAxis::Alpha(alphas) => alphas
                .iter()
                .map(|&a| with(format!("{}_alpha{a}", base.agent.loss_variant), &|c| c.agent.alpha = a))
                .collect(),
        };
        for c in &configs {
            c.validate()?;
        }
        Ok(configs)
    }

    /// Label of the configuration the others are compared against: DQN when
    /// sweeping variants and DQN is present, otherwise the first value.
    fn baseline(&self, configs: &[RunConfig]) -> String {
        if let SweepAxis::Variant(vs) = self {
            if vs.contains(&LossVariant::Dqn) {
                return LossVariant::Dqn.name().to_string();
            }
        }
        configs[0].method()
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub outcomes: Vec<RunOutcome>,
    pub baseline: String,
    pub summary: Vec<SummaryRow>,
}

/// Expands `axis` over `base`, runs every (value, seed) pair, writes per-seed
/// CSVs and `summary.csv` into the output directory.
pub fn sweep(base: &RunConfig, axis: &SweepAxis) -> Result<SweepResult> {
    let configs = axis.expand(base)?;
    let jobs: Vec<(RunConfig, u64)> = configs
        .iter()
        .flat_map(|c| c.run.seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();
    let outcomes = run_jobs(&jobs, base.workers())?;
    write_outcomes(&outcomes, &base.run.out)?;

    let baseline = axis.baseline(&configs);
    let rows: Vec<_> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let runs = RunRecord::from_rows(&rows)?;
    let mut summary = Vec::new();
    for c in &configs {
        summary.extend(summarize(&runs, &c.method(), &baseline, DEFAULT_IMPROVEMENT_EPS)?);
    }
    emit_summary(&summary, base.run.out.join("summary.csv"))?;
    Ok(SweepResult { outcomes, baseline, summary })
}

/// Random-policy and planner scores for an environment, each averaged over
/// `episodes` episodes with a fixed seed sequence.
pub fn baseline_anchors(spec: &EnvSpec, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let mut env = spec.build()?;
    let mut rng = rng::stream(seed, label::EVAL);
    let mut score = |policy: &mut dyn FnMut(&dyn Environment, &mut rng::Rng) -> usize| -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..episodes {
            env.reset(rng.random());
            loop {
                let action = policy(&env, &mut rng);
                let step = env.step(action)?;
                total += step.reward;
                if step.done {
                    break;
                }
            }
        }
        Ok(total / episodes as f64)
    };
    let random = score(&mut |env, rng| rng.random_range(0..env.n_actions()))?;
    let reference = score(&mut |env, _| env.planner_action())?;
    Ok((random, reference))
}
