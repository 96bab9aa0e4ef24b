use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters. Weight decay is decoupled: it shrinks parameters
/// directly rather than being added to the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_weight_decay() -> f64 {
    1e-4
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            weight_decay: default_weight_decay(),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| (0.0..1.0).contains(&b);
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::validation("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::validation("Adam eps must be > 0 and weight decay >= 0"));
        }
        Ok(())
    }
}

/// Moment accumulators for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(model: &MlpModel<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = model
            .blocks()
            .iter()
            .map(|b| vec![T::zero(); b.len()])
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update with decoupled weight decay.
    ///
    /// Non-finite gradients abort the step before anything is modified.
    pub fn step(&mut self, model: &mut MlpModel<T>, grads: &Gradients<T>, lr: f64) -> Result<()> {
        let grad_blocks = grads.blocks();
        let mut params = model.blocks_mut();
        if grad_blocks.len() != params.len() {
            return Err(Error::dimension("gradient blocks", params.len(), grad_blocks.len()));
        }
        for (g, p) in grad_blocks.iter().zip(params.iter()) {
            if g.len() != p.len() {
                return Err(Error::dimension("gradient block", p.len(), g.len()));
            }
        }
        if !grads.all_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient at optimizer step {}",
                self.step + 1
            )));
        }

        self.step += 1;
        let c = &self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        let correction1 = one - T::of(c.beta1.powi(self.step as i32));
        let correction2 = one - T::of(c.beta2.powi(self.step as i32));
        let lr_t = T::of(lr);
        let decay = T::of(lr * c.weight_decay);
        let eps = T::of(c.eps);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(&grad_blocks)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] = p[i] - decay * p[i] - lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
