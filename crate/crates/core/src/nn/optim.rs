use serde::{Deserialize, Serialize};

use super::layers::Layer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0004,
            rho: 0.9,
            eps: 1e-7,
        }
    }
}

/// One RMSprop update of `params` in place, accumulating into `sq_avg`.
pub fn rmsprop_step(cfg: &RmsPropConfig, params: &mut [f64], grads: &[f64], sq_avg: &mut [f64]) {
    for ((p, g), v) in params.iter_mut().zip(grads).zip(sq_avg.iter_mut()) {
        *v = cfg.rho * *v + (1.0 - cfg.rho) * g * g;
        *p -= cfg.learning_rate * g / (v.sqrt() + cfg.eps);
    }
}

/// RMSprop state for every trainable tensor of a layer stack.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    state: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        Self {
            config,
            state: Vec::new(),
        }
    }

    pub fn step(&mut self, layers: &mut [Layer]) {
        let mut slot = 0;
        for layer in layers {
            for p in layer.params_mut() {
                if self.state.len() == slot {
                    self.state.push(vec![0.0; p.value.len()]);
                }
                rmsprop_step(&self.config, p.value, p.grad, &mut self.state[slot]);
                slot += 1;
            }
        }
    }
}
