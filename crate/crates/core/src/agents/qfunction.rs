use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Tabular,
    Linear,
    Mlp,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::Tabular, Representation::Linear, Representation::Mlp];

    pub(crate) fn tag(self) -> u32 {
        match self {
            Representation::Tabular => 0,
            Representation::Linear => 1,
            Representation::Mlp => 2,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.tag() == tag)
    }
}

const STACK_HIDDEN: usize = 256;

/// Action-value function over one-hot encoded states.
///
/// All parameters live in one flat vector so that optimizers, target syncs
/// and checkpoints treat the three representations uniformly:
///
/// * tabular: `Q[s][a]` at `s * n_actions + a`;
/// * linear: weights `W[s][a]` then bias `b[a]`, so `Q(s) = W[s] + b`;
/// * mlp: `W1[s][j]`, `b1[j]`, `W2[a][j]`, `b2[a]` with a rectified hidden
///   layer of width `hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    representation: Representation,
    n_states: usize,
    n_actions: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl QFunction {
    pub fn parameter_count(representation: Representation, n_states: usize, n_actions: usize, hidden: usize) -> usize {
        match representation {
            Representation::Tabular => n_states * n_actions,
            Representation::Linear => n_states * n_actions + n_actions,
            Representation::Mlp => n_states * hidden + hidden + n_actions * hidden + n_actions,
        }
    }

    /// All-zero parameters.
    pub fn zeros(representation: Representation, n_states: usize, n_actions: usize, hidden: usize) -> Self {
        let hidden = if representation == Representation::Mlp { hidden } else { 0 };
        let len = Self::parameter_count(representation, n_states, n_actions, hidden);
        Self { representation, n_states, n_actions, hidden, params: vec![0.0; len] }
    }

    /// Tabular and linear start at zero; the MLP draws every weight and bias
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(
        representation: Representation,
        n_states: usize,
        n_actions: usize,
        hidden: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || (representation == Representation::Mlp && hidden == 0) {
            return Err(Error::Config("Q-function dimensions must be positive".into()));
        }
        let mut qf = Self::zeros(representation, n_states, n_actions, hidden);
        if representation == Representation::Mlp {
            let first = n_states * hidden + hidden;
            let b1 = 1.0 / (n_states as f64).sqrt();
            let b2 = 1.0 / (hidden as f64).sqrt();
            for (i, p) in qf.params.iter_mut().enumerate() {
                let bound = if i < first { b1 } else { b2 };
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(qf)
    }

    pub fn from_params(
        representation: Representation,
        n_states: usize,
        n_actions: usize,
        hidden: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut qf = Self::zeros(representation, n_states, n_actions, hidden);
        if params.len() != qf.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                qf.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("parameters must be finite".into()));
        }
        qf.params = params;
        Ok(qf)
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Overwrites a row of a tabular function.
    pub fn set_row(&mut self, state: usize, values: &[f64]) -> Result<()> {
        if self.representation != Representation::Tabular || values.len() != self.n_actions {
            return Err(Error::Usage("set_row needs a tabular function and one value per action".into()));
        }
        let start = state * self.n_actions;
        self.params[start..start + self.n_actions].copy_from_slice(values);
        Ok(())
    }

    /// Copies every parameter from `other`.
    pub fn copy_from(&mut self, other: &QFunction) {
        debug_assert_eq!(self.params.len(), other.params.len());
        self.params.copy_from_slice(&other.params);
    }

    pub fn q_values(&self, state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        self.q_values_into(state, &mut out);
        out
    }

    pub fn q_values_into(&self, state: usize, out: &mut [f64]) {
        assert!(state < self.n_states, "state {state} out of range");
        let na = self.n_actions;
        match self.representation {
            Representation::Tabular => out.copy_from_slice(&self.params[state * na..(state + 1) * na]),
            Representation::Linear => {
                let (w, b) = self.params.split_at(self.n_states * na);
                for (a, q) in out.iter_mut().enumerate() {
                    *q = w[state * na + a] + b[a];
                }
            }
            Representation::Mlp => {
                let h = self.hidden;
                let (w1, rest) = self.params.split_at(self.n_states * h);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(na * h);
                let w1_row = &w1[state * h..(state + 1) * h];
                let mut hidden = [0.0; STACK_HIDDEN];
                let mut heap = Vec::new();
                let act: &mut [f64] = if h <= STACK_HIDDEN {
                    &mut hidden[..h]
                } else {
                    heap.resize(h, 0.0);
                    &mut heap
                };
                for ((x, w), b) in act.iter_mut().zip(w1_row).zip(b1) {
                    *x = (w + b).max(0.0);
                }
                for (a, q) in out.iter_mut().enumerate() {
                    let w2_row = &w2[a * h..(a + 1) * h];
                    *q = b2[a] + w2_row.iter().zip(act.iter()).map(|(w, x)| w * x).sum::<f64>();
                }
            }
        }
    }

    /// `grad += scale * dQ(state, action) / dtheta`.
    pub fn accumulate_grad(&self, state: usize, action: usize, scale: f64, grad: &mut [f64]) {
        let na = self.n_actions;
        match self.representation {
            Representation::Tabular => grad[state * na + action] += scale,
            Representation::Linear => {
                grad[state * na + action] += scale;
                grad[self.n_states * na + action] += scale;
            }
            Representation::Mlp => {
                let h = self.hidden;
                let w1_off = 0;
                let b1_off = self.n_states * h;
                let w2_off = b1_off + h;
                let b2_off = w2_off + na * h;
                for j in 0..h {
                    let pre = self.params[w1_off + state * h + j] + self.params[b1_off + j];
                    if pre > 0.0 {
                        grad[w2_off + action * h + j] += scale * pre;
                        let back = scale * self.params[w2_off + action * h + j];
                        grad[w1_off + state * h + j] += back;
                        grad[b1_off + j] += back;
                    }
                }
                grad[b2_off + action] += scale;
            }
        }
    }
}
