//! First-order optimizers over flat parameter slices.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

const RMSPROP_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    /// Nesterov momentum in the "look-ahead" form:
    /// `u ← μu − ηg`, `θ ← θ + μu − ηg`.
    SgdNesterov { momentum: f64 },
    /// `a ← γa + (1−γ)g²`, `θ ← θ − ηg / (√a + 1e-8)`.
    RmsProp { decay: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn sgd_nesterov(learning_rate: f64, momentum: f64) -> Self {
        Self { kind: OptimizerKind::SgdNesterov { momentum }, learning_rate }
    }

    pub fn rmsprop(learning_rate: f64, decay: f64) -> Self {
        Self { kind: OptimizerKind::RmsProp { decay }, learning_rate }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        let coeff = match self.kind {
            OptimizerKind::SgdNesterov { momentum } => momentum,
            OptimizerKind::RmsProp { decay } => decay,
        };
        if !(0.0..1.0).contains(&coeff) {
            return Err(invalid(format!("momentum/decay must lie in [0, 1), got {coeff}")));
        }
        Ok(())
    }
}

/// Optimizer plus one accumulator per parameter tensor, created lazily on
/// the first step.
#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    pub config: OptimizerConfig,
    accumulators: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, accumulators: Vec::new() })
    }

    pub fn accumulators(&self) -> &[Vec<T>] {
        &self.accumulators
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(invalid(format!("optimizer: {} parameter tensors, {} gradients", params.len(), grads.len())));
        }
        if let Some(i) = params.iter().zip(grads).position(|(p, g)| p.len() != g.len()) {
            return Err(invalid(format!("optimizer: tensor {i} shape mismatch")));
        }
        if self.accumulators.is_empty() {
            self.accumulators = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        } else if self.accumulators.len() != params.len()
            || self.accumulators.iter().zip(params.iter()).any(|(a, p)| a.len() != p.len())
        {
            return Err(invalid("optimizer: parameter layout changed between steps"));
        }
        let lr = T::lit(self.config.learning_rate);
        match self.config.kind {
            OptimizerKind::SgdNesterov { momentum } => {
                let mu = T::lit(momentum);
                for ((p, g), u) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
                    for ((pi, &gi), ui) in p.iter_mut().zip(g.iter()).zip(u.iter_mut()) {
                        *ui = mu * *ui - lr * gi;
                        *pi = *pi + mu * *ui - lr * gi;
                    }
                }
            }
            OptimizerKind::RmsProp { decay } => {
                let gamma = T::lit(decay);
                let eps = T::lit(RMSPROP_EPS);
                for ((p, g), a) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
                    for ((pi, &gi), ai) in p.iter_mut().zip(g.iter()).zip(a.iter_mut()) {
                        *ai = gamma * *ai + (T::one() - gamma) * gi * gi;
                        *pi = *pi - lr * gi / (ai.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
