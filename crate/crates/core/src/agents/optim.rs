use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
    Adam,
}

const RMS_DECAY: f64 = 0.95;
const RMS_EPS: f64 = 1e-5;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
enum Moments {
    Sgd,
    RmsProp { mean_square: Vec<f64> },
    Adam { first: Vec<f64>, second: Vec<f64>, t: i32 },
}

/// First-order optimizer with its running statistics.
#[derive(Debug, Clone)]
pub struct Optimizer {
    learning_rate: f64,
    moments: Moments,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => Moments::Sgd,
            OptimizerKind::RmsProp => Moments::RmsProp { mean_square: vec![0.0; n_params] },
            OptimizerKind::Adam => Moments::Adam { first: vec![0.0; n_params], second: vec![0.0; n_params], t: 0 },
        };
        Self { learning_rate, moments }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self.moments {
            Moments::Sgd => OptimizerKind::Sgd,
            Moments::RmsProp { .. } => OptimizerKind::RmsProp,
            Moments::Adam { .. } => OptimizerKind::Adam,
        }
    }

    /// Applies one update. Fails without touching `params` on a non-finite
    /// gradient, and after the update if a parameter overflowed.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::Config(format!("{} parameters but {} gradient entries", params.len(), grad.len())));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("gradient entry {i} is {}", grad[i])));
        }
        let lr = self.learning_rate;
        match &mut self.moments {
            Moments::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Moments::RmsProp { mean_square } => {
                let n = params.len();
                let (params, grad, mean_square) = (&mut params[..n], &grad[..n], &mut mean_square[..n]);
                for i in 0..n {
                    let g = grad[i];
                    mean_square[i] = RMS_DECAY * mean_square[i] + (1.0 - RMS_DECAY) * g * g;
                    params[i] -= lr * g / (mean_square[i].sqrt() + RMS_EPS);
                }
            }
            Moments::Adam { first, second, t } => {
                *t += 1;
                let step_size = lr / (1.0 - ADAM_BETA1.powi(*t));
                let inv_c2 = 1.0 / (1.0 - ADAM_BETA2.powi(*t));
                let n = params.len();
                let (params, grad, first, second) = (&mut params[..n], &grad[..n], &mut first[..n], &mut second[..n]);
                for i in 0..n {
                    let g = grad[i];
                    let m = ADAM_BETA1 * first[i] + (1.0 - ADAM_BETA1) * g;
                    let v = ADAM_BETA2 * second[i] + (1.0 - ADAM_BETA2) * g * g;
                    first[i] = m;
                    second[i] = v;
                    params[i] -= step_size * m / ((v * inv_c2).sqrt() + ADAM_EPS);
                }
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("parameters became non-finite".into()));
        }
        Ok(())
    }
}
