//! Evaluation arithmetic and CSV artifacts.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::QFunction;
use crate::error::{Error, Result};
use crate::mdp::{max_value, top_two_gap};
use crate::replay::TransitionRecord;

pub const DEFAULT_IMPROVEMENT_EPS: f64 = 1e-6;

/// One evaluation point of one run; also the per-run CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub env: String,
    pub seed: u64,
    pub step: u64,
    pub eval_return: f64,
    pub mean_action_gap: Option<f64>,
    pub stale_fraction: Option<f64>,
    pub loss: Option<f64>,
}

/// One line of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub env: String,
    pub rel_improvement_vs_baseline: f64,
    pub final_score_mean: f64,
    pub final_score_median: f64,
}

/// Evaluation scores of one (method, env, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub env: String,
    pub seed: u64,
    pub scores: Vec<(u64, f64)>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        if self.scores.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Usage(format!("{}/{} seed {}: eval steps must increase", self.method, self.env, self.seed)));
        }
        if self.scores.iter().any(|(_, s)| !s.is_finite()) {
            return Err(Error::Usage("scores must be finite".into()));
        }
        Ok(())
    }

    pub fn final_score(&self) -> Option<f64> {
        self.scores.last().map(|&(_, s)| s)
    }

    /// Groups CSV rows into runs, ordered by (method, env, seed).
    pub fn from_rows(rows: &[EvalRow]) -> Result<Vec<RunRecord>> {
        let mut runs: BTreeMap<(String, String, u64), Vec<(u64, f64)>> = BTreeMap::new();
        for row in rows {
            runs.entry((row.method.clone(), row.env.clone(), row.seed))
                .or_default()
                .push((row.step, row.eval_return));
        }
        runs.into_iter()
            .map(|((method, env, seed), mut scores)| {
                scores.sort_by_key(|&(step, _)| step);
                let run = RunRecord { method, env, seed, scores };
                run.validate()?;
                Ok(run)
            })
            .collect()
    }
}

/// Per-env `(s_random, s_reference)` score pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineAnchors {
    anchors: HashMap<String, (f64, f64)>,
}

impl BaselineAnchors {
    pub fn insert(&mut self, env: impl Into<String>, random: f64, reference: f64) -> Result<()> {
        if random == reference {
            return Err(Error::Usage("reference and random anchors must differ".into()));
        }
        self.anchors.insert(env.into(), (random, reference));
        Ok(())
    }

    pub fn get(&self, env: &str) -> Option<(f64, f64)> {
        self.anchors.get(env).copied()
    }

    pub fn normalize(&self, env: &str, score: f64) -> Result<f64> {
        let (random, reference) =
            self.get(env).ok_or_else(|| Error::Usage(format!("no baseline anchors for `{env}`")))?;
        Ok((score - random) / (reference - random).abs())
    }
}

/// `(mean(x) - mean(base)) / (|mean(base)| + eps)` over per-step seed-averaged scores.
pub fn mean_relative_improvement(scores_x: &[f64], scores_base: &[f64], eps: f64) -> Result<f64> {
    if scores_x.len() != scores_base.len() || scores_x.is_empty() {
        return Err(Error::Usage(format!(
            "curves must have the same non-zero length ({} vs {})",
            scores_x.len(),
            scores_base.len()
        )));
    }
    let n = scores_x.len() as f64;
    let mean_x = scores_x.iter().sum::<f64>() / n;
    let mean_base = scores_base.iter().sum::<f64>() / n;
    Ok((mean_x - mean_base) / (mean_base.abs() + eps))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Median across envs of `(score - s_random) / |s_reference - s_random|`.
pub fn normalized_median(per_env_scores: &[(&str, f64)], anchors: &BaselineAnchors) -> Result<f64> {
    let normalized = per_env_scores
        .iter()
        .map(|&(env, score)| anchors.normalize(env, score))
        .collect::<Result<Vec<_>>>()?;
    median(&normalized).ok_or_else(|| Error::Usage("no env scores to aggregate".into()))
}

/// Mean over `states` of the best-minus-second-best action value.
pub fn mean_action_gap(qf: &QFunction, states: &[usize]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    let mut row = vec![0.0; qf.n_actions()];
    let total: f64 = states
        .iter()
        .map(|&s| {
            qf.q_values_into(s, &mut row);
            top_two_gap(&row)
        })
        .sum();
    total / states.len() as f64
}

/// Fraction of records whose stored return exceeds the target's value
/// estimate `max_a Q(s, a)`. Records with a pending return are ignored.
pub fn stale_fraction(batch: &[TransitionRecord], target: &QFunction) -> f64 {
    let mut row = vec![0.0; target.n_actions()];
    let (mut above, mut total) = (0usize, 0usize);
    for record in batch {
        if let Some(g) = record.mc_return {
            target.q_values_into(record.state, &mut row);
            above += (g > max_value(&row)) as usize;
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        above as f64 / total as f64
    }
}

fn sort_key(row: &EvalRow) -> (&str, &str, u64, u64) {
    (&row.method, &row.env, row.seed, row.step)
}

/// Writes rows sorted by (method, env, seed, step). An empty set writes only the header.
pub fn emit_csv(rows: &[EvalRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut sorted: Vec<&EvalRow> = rows.iter().collect();
    sorted.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    if sorted.is_empty() {
        writer
            .write_record(["method", "env", "seed", "step", "eval_return", "mean_action_gap", "stale_fraction", "loss"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for row in sorted {
        writer.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<EvalRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    reader.deserialize().map(|r| r.map_err(|e| Error::csv(path, e))).collect()
}

pub fn emit_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    if rows.is_empty() {
        writer
            .write_record(["method", "env", "rel_improvement_vs_baseline", "final_score_mean", "final_score_median"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for row in rows {
        writer.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    reader.deserialize().map(|r| r.map_err(|e| Error::csv(path, e))).collect()
}

/// Seed-averaged score at each eval step shared by every run.
pub fn seed_averaged_curve(runs: &[&RunRecord]) -> Result<Vec<(u64, f64)>> {
    let first = runs.first().ok_or_else(|| Error::Usage("no runs to average".into()))?;
    let steps: Vec<u64> = first.scores.iter().map(|&(s, _)| s).collect();
    for run in runs {
        if run.scores.iter().map(|&(s, _)| s).ne(steps.iter().copied()) {
            return Err(Error::Usage(format!(
                "{}/{} seed {} has a different eval schedule",
                run.method, run.env, run.seed
            )));
        }
    }
    let n = runs.len() as f64;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, &step)| (step, runs.iter().map(|r| r.scores[i].1).sum::<f64>() / n))
        .collect())
}

/// Summarizes `method` against `baseline` on every env both were run on.
pub fn summarize(runs: &[RunRecord], method: &str, baseline: &str, eps: f64) -> Result<Vec<SummaryRow>> {
    let pick = |m: &str| -> Vec<RunRecord> { runs.iter().filter(|r| r.method == m).cloned().collect() };
    compare_runs(method, &pick(method), &pick(baseline), eps).map_err(|e| match e {
        Error::Usage(msg) => Error::Usage(format!("baseline `{baseline}`: {msg}")),
        other => other,
    })
}

/// Compares two groups of runs env by env, labelling the rows `method`.
/// Every env in `runs_x` must also appear in `runs_base`.
pub fn compare_runs(method: &str, runs_x: &[RunRecord], runs_base: &[RunRecord], eps: f64) -> Result<Vec<SummaryRow>> {
    let mut envs: Vec<&str> = runs_x.iter().map(|r| r.env.as_str()).collect();
    envs.sort_unstable();
    envs.dedup();
    let mut out = Vec::new();
    for env in envs {
        let xs: Vec<&RunRecord> = runs_x.iter().filter(|r| r.env == env).collect();
        let bases: Vec<&RunRecord> = runs_base.iter().filter(|r| r.env == env).collect();
        if bases.is_empty() {
            return Err(Error::Usage(format!("no baseline runs on `{env}`")));
        }
        let curve_x: Vec<f64> = seed_averaged_curve(&xs)?.into_iter().map(|(_, s)| s).collect();
        let curve_b: Vec<f64> = seed_averaged_curve(&bases)?.into_iter().map(|(_, s)| s).collect();
        let finals: Vec<f64> = xs.iter().filter_map(|r| r.final_score()).collect();
        out.push(SummaryRow {
            method: method.to_string(),
            env: env.to_string(),
            rel_improvement_vs_baseline: mean_relative_improvement(&curve_x, &curve_b, eps)?,
            final_score_mean: finals.iter().sum::<f64>() / finals.len() as f64,
            final_score_median: median(&finals).unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}
