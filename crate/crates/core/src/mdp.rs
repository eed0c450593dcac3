//! Exact finite-MDP machinery: returns, the optimality and advantage-learning
//! backups, action gaps, and a value-iteration oracle.
//!
//! Values are reduced with a single convention everywhere: `V(s) = max_a Q(s, a)`.
//! Argmax ties go to the lowest action index.

use std::path::Path;


use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;
pub const DEFAULT_VI_TOL: f64 = 1e-10;

/// Index of the largest entry, lowest index on ties. Panics on an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn max_value(values: &[f64]) -> f64 {
    values[argmax(values)]
}

/// Difference between the best and second-best entries; zero for a single entry.
pub fn top_two_gap(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let best = argmax(values);
    let second = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    values[best] - second
}

/// An explicit finite MDP. Transition probabilities are stored densely as
/// `P[s][a][s']` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("an MDP needs at least one state and one action".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::Config(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions || terminal.len() != n_states {
            return Err(Error::Config("reward table or terminal flags have the wrong size".into()));
        }
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            let (s, a) = (row_idx / n_actions, row_idx % n_actions);
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config(format!("P[{s}][{a}] has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("P[{s}][{a}] sums to {sum}, not 1")));
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config("rewards must be finite".into()));
        }
        for (s, _) in terminal.iter().enumerate().filter(|(_, &t)| t) {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                if transition[base + s] != 1.0 || reward[s * n_actions + a] != 0.0 {
                    return Err(Error::Config(format!(
                        "terminal state {s} must self-loop with zero reward"
                    )));
                }
            }
        }
        Ok(Self { n_states, n_actions, transition, reward, gamma, terminal })
    }

    /// Builds an MDP and marks as terminal every state whose actions all
    /// self-loop with probability one and zero reward.
    pub fn with_inferred_terminals(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let mut terminal = vec![false; n_states];
        if transition.len() == n_states * n_actions * n_states && reward.len() == n_states * n_actions
        {
            for (s, flag) in terminal.iter_mut().enumerate() {
                *flag = (0..n_actions).all(|a| {
                    transition[(s * n_actions + a) * n_states + s] == 1.0
                        && reward[s * n_actions + a] == 0.0
                });
            }
        }
        Self::new(n_states, n_actions, transition, reward, gamma, terminal)
    }

    /// A random MDP with dense transition rows and rewards in `[0, 1)`, no terminals.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, rng: &mut impl rand::Rng) -> Result<Self> {
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let sum: f64 = row.iter().sum();
            transition.extend(row.iter().map(|p| p / sum));
        }
        let reward = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
        Self::new(n_states, n_actions, transition, reward, gamma, vec![false; n_states])
    }

    /// Parses the plain-text MDP format: a header `states actions gamma`, then
    /// one line per `(s, a)` in order holding the reward followed by `states`
    /// transition probabilities. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (header_line, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, msg: "missing header `states actions gamma`".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("header needs 3 fields, found {}", fields.len()),
            });
        }
        let parse_err = |msg: String| Error::Parse { line: header_line, msg };
        let n_states: usize = fields[0].parse().map_err(|e| parse_err(format!("states: {e}")))?;
        let n_actions: usize = fields[1].parse().map_err(|e| parse_err(format!("actions: {e}")))?;
        let gamma: f64 = fields[2].parse().map_err(|e| parse_err(format!("gamma: {e}")))?;

        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        let mut reward = Vec::with_capacity(n_states * n_actions);
        let mut last_line = header_line;
        for row in 0..n_states * n_actions {
            let (line, body) = lines.next().ok_or_else(|| Error::Parse {
                line: last_line + 1,
                msg: format!("expected {} (s, a) rows, found {row}", n_states * n_actions),
            })?;
            last_line = line;
            let nums = body
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("`{t}`: {e}") }))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != n_states + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected a reward and {n_states} probabilities, found {} numbers", nums.len()),
                });
            }
            let sum: f64 = nums[1..].iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || nums[1..].iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Parse { line, msg: format!("probabilities must lie in [0, 1] and sum to 1 (sum {sum})") });
            }
            reward.push(nums[0]);
            transition.extend_from_slice(&nums[1..]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse { line, msg: "trailing data after the last (s, a) row".into() });
        }
        Self::with_inferred_terminals(n_states, n_actions, transition, reward, gamma)
            .map_err(|e| Error::Parse { line: header_line, msg: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Serializes to the text format accepted by [`TabularMdp::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n_states, self.n_actions, self.gamma);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.push_str(&format!("{}", self.reward(s, a)));
                for p in self.transition_row(s, a) {
                    out.push_str(&format!(" {p}"));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }
}

/// Action values `Q[s][a]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_actions == 0 || rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Config("Q rows must be non-empty and equally long".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("Q entries must be finite".into()));
        }
        Ok(Self { n_states: rows.len(), n_actions, values: rows.concat() })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V(s) = max_a Q(s, a)`.
    pub fn state_value(&self, s: usize) -> f64 {
        max_value(self.row(s))
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(Error::Config(format!(
                "Q table is {}x{} but the MDP is {}x{}",
                self.n_states, self.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }
}

/// A sequence of `(state, action, reward)` steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize, f64)>,
    pub terminal: bool,
}

impl Trajectory {
    pub fn push(&mut self, state: usize, action: usize, reward: f64) {
        self.steps.push((state, action, reward));
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|&(_, _, r)| r).collect()
    }

    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        discounted_returns(&self.rewards(), gamma)
    }
}

/// `G_t = sum_{t' >= t} gamma^(t'-t) r_t'` for every t, in one backward pass.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (g, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    out
}

/// `(T*Q)(s, a) = R(s, a) + gamma * sum_s' P(s'|s, a) max_a' Q(s', a')`, with
/// terminal successors contributing no continuation.
pub fn bellman_optimality_backup(q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
    q.check_shape(mdp)?;
    let continuation: Vec<f64> = (0..mdp.n_states)
        .map(|s| if mdp.terminal[s] { 0.0 } else { q.state_value(s) })
        .collect();
    let mut out = QTable::zeros(mdp.n_states, mdp.n_actions);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let expected: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&continuation)
                .map(|(p, v)| p * v)
                .sum();
            out.set(s, a, mdp.reward(s, a) + mdp.gamma * expected);
        }
    }
    Ok(out)
}

/// Advantage-learning backup `T*Q + alpha (Q - max_a' Q)`.
pub fn al_backup(q: &QTable, mdp: &TabularMdp, alpha: f64) -> Result<QTable> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let mut out = bellman_optimality_backup(q, mdp)?;
    if alpha == 0.0 {
        return Ok(out);
    }
    for s in 0..q.n_states {
        let v = q.state_value(s);
        for a in 0..q.n_actions {
            let corrected = out.get(s, a) + alpha * (q.get(s, a) - v);
            out.set(s, a, corrected);
        }
    }
    Ok(out)
}

fn iterate_to_fixed_point(
    mdp: &TabularMdp,
    tol: f64,
    backup: impl Fn(&QTable) -> Result<QTable>,
) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    for _ in 0..MAX_ITERATIONS {
        let next = backup(&q)?;
        let delta = next.sup_distance(&q);
        q = next;
        if !delta.is_finite() {
            return Err(Error::Numerical("backup produced non-finite values".into()));
        }
        // Under a gamma-contraction the returned table has residual <= gamma * delta.
        if delta < tol {
            return Ok(q);
        }
    }
    Err(Error::Numerical(format!("no convergence after {MAX_ITERATIONS} iterations")))
}

/// Optimal action values, iterated until the sup-norm Bellman residual is below `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    iterate_to_fixed_point(mdp, tol, |q| bellman_optimality_backup(q, mdp))
}

/// Fixed point of the advantage-learning backup, iterated from zeros.
pub fn al_fixed_point(mdp: &TabularMdp, alpha: f64, tol: f64) -> Result<QTable> {
    iterate_to_fixed_point(mdp, tol, |q| al_backup(q, mdp, alpha))
}

/// `gap[a] = max_a' Q(s, a') - Q(s, a)`.
pub fn action_gap(q: &QTable, s: usize) -> Vec<f64> {
    let row = q.row(s);
    let best = max_value(row);
    row.iter().map(|v| best - v).collect()
}

/// `Q(s, a) - max_a' Q(s, a')`, never positive.
pub fn advantage(q: &QTable, s: usize, a: usize) -> f64 {
    q.get(s, a) - q.state_value(s)
}

pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    (0..q.n_states).map(|s| argmax(q.row(s))).collect()
}

/// Mean over states of the best-minus-second-best gap.
pub fn mean_top_two_gap(q: &QTable) -> f64 {
    (0..q.n_states).map(|s| top_two_gap(q.row(s))).sum::<f64>() / q.n_states as f64
}
