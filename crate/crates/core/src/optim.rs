//! Adam with optional linear warmup.

use alloc::vec::Vec;

use crate::model::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Steps of linear warmup from 0 to `learning_rate`; 0 disables it.
    pub warmup_steps: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 5e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8, warmup_steps: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &Params) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| alloc::vec![0.0; t.len()]).collect();
        Adam { config, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Learning rate that the next call to [`Adam::step`] will use.
    pub fn current_lr(&self) -> f64 {
        let c = &self.config;
        if c.warmup_steps > 0 && self.step < c.warmup_steps {
            c.learning_rate * (self.step + 1) as f64 / c.warmup_steps as f64
        } else {
            c.learning_rate
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        let lr = self.current_lr();
        self.step += 1;
        let c = &self.config;
        let bc1 = 1.0 - libm::pow(c.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, self.step as f64);
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (libm::sqrt(vhat) + c.eps);
            }
        }
    }
}
