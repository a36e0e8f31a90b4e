use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::netcore::ParameterSet;

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
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    steps: u64,
    m: ParameterSet<f32>,
    v: ParameterSet<f32>,
}

impl Adam {
    pub fn new(config: AdamConfig, like: &ParameterSet<f32>) -> Self {
        Self {
            config,
            steps: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn update(&mut self, params: &mut ParameterSet<f32>, grads: &ParameterSet<f32>) -> Result<()> {
        params.check_same_layout(grads)?;
        params.check_same_layout(&self.m)?;
        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let bc1 = (1.0 - c.beta1.powi(t)) as f32;
        let bc2 = (1.0 - c.beta2.powi(t)) as f32;
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let (lr, eps) = (c.learning_rate as f32, c.epsilon as f32);
        for (i, (_, p)) in params.iter_mut().enumerate() {
            let g = grads.tensor(i).data();
            let m = self.m.tensor_mut(i).data_mut();
            let v = self.v.tensor_mut(i).data_mut();
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
