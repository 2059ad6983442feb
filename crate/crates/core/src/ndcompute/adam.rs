use serde::{Deserialize, Serialize};

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment accumulators mirroring a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any parameter.
pub fn adam_step(params: &mut ParamSet, grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameters, {} gradients, {} accumulators",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (id, g) in params.ids().zip(grads) {
        if g.shape() != params.get(id).shape() || g.shape() != state.first[id.index()].shape() {
            return Err(Error::InvalidArgument(format!(
                "gradient shape {:?} does not match parameter `{}` {:?}",
                g.shape(),
                params.name(id),
                params.get(id).shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient {
                tensor: params.name(id).to_string(),
            });
        }
    }

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    for (k, param) in params.tensors_mut().iter_mut().enumerate() {
        let g = grads[k].data();
        let m = state.first[k].data_mut();
        let v = state.second[k].data_mut();
        for (((p, &gi), mi), vi) in param.data_mut().iter_mut().zip(g).zip(m).zip(v) {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
