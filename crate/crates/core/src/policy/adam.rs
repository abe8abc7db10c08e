use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::PolicyParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a flat tensor. `step` is the 1-based
/// index of this update.
pub fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &AdamConfig) {
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for (((x, &g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *x -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Adam moments for every tensor of a [`PolicyParams`], in tensor order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &PolicyParams, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|(_, _, v)| vec![0.0; v.len()]).collect();
        Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// Applies one update. Non-finite gradients are rejected before any
    /// parameter changes.
    pub fn step(&mut self, params: &mut PolicyParams, grads: &PolicyParams) -> Result<()> {
        if params.shape() != grads.shape() {
            return Err(Error::Shape("gradient shape differs from parameters".into()));
        }
        let grad_tensors = grads.tensors();
        if grad_tensors.len() != self.first_moment.len()
            || grad_tensors
                .iter()
                .zip(&self.first_moment)
                .any(|((_, _, g), m)| g.len() != m.len())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        if let Some((name, _, _)) = grad_tensors
            .iter()
            .find(|(_, _, g)| g.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
        self.step += 1;
        let step = self.step;
        for (k, (_, slot)) in params.tensors_mut().into_iter().enumerate() {
            adam_update(
                slot,
                grad_tensors[k].2,
                &mut self.first_moment[k],
                &mut self.second_moment[k],
                step,
                &self.config,
            );
        }
        Ok(())
    }
}
