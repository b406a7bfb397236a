use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
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

/// First/second moment accumulators for every network parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: vec![0.0; net.n_params()],
            second: vec![0.0; net.n_params()],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.values.len() != net.n_params() || self.first.len() != net.n_params() {
            return Err(Error::DimensionMismatch {
                expected: net.n_params(),
                actual: grads.values.len(),
            });
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let params = net.params_mut();
        for i in 0..params.len() {
            let g = grads.values[i];
            self.first[i] = beta1 * self.first[i] + (1.0 - beta1) * g;
            self.second[i] = beta2 * self.second[i] + (1.0 - beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        if !net.all_finite() {
            return Err(Error::invalid("optimizer step produced non-finite weights"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_params(&[1, 1], vec![w, 0.0]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut net = scalar_net(0.3);
        let mut opt = AdamState::new(&net, AdamConfig::default());
        let g = Gradients::zeros_like(&net);
        opt.apply(&mut net, &g).unwrap();
        assert_eq!(net.params(), &[0.3, 0.0]);
    }

    #[test]
    fn single_step_by_hand() {
        // m = 0.1 g, v = 0.001 g^2; bias-corrected m_hat = g, v_hat = g^2
        let g = 0.5;
        let mut net = scalar_net(1.0);
        let mut opt = AdamState::new(&net, AdamConfig::default());
        opt.apply(&mut net, &Gradients { values: vec![g, 0.0] }).unwrap();
        let expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((net.params()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn bias_correction_schedule() {
        let g = 2.0;
        let mut net = scalar_net(0.0);
        let mut opt = AdamState::new(&net, AdamConfig::default());
        let grads = Gradients { values: vec![g, 0.0] };
        opt.apply(&mut net, &grads).unwrap();
        let w1 = net.params()[0];
        opt.apply(&mut net, &grads).unwrap();
        let step2 = net.params()[0] - w1;
        // step 2: m = 0.19 g, v = 0.001999 g^2, corrections 0.19 and 0.001999
        let m_hat = (0.9 * 0.1 * g + 0.1 * g) / (1.0 - 0.81);
        let v_hat = (0.999 * 0.001 * g * g + 0.001 * g * g) / (1.0 - 0.999f64 * 0.999);
        let expected = -1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((w1 - (-1e-3 * g / (g + 1e-8))).abs() < 1e-12);
        assert!((step2 - expected).abs() < 1e-12);
        assert_eq!(opt.step_count(), 2);
    }
}
