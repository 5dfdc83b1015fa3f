use serde::{Deserialize, Serialize};

use super::tensor::{Parameter, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Parameter]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
                .collect()
        };
        AdamState {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Apply one update using each parameter's current `grad`.
    pub fn step(&mut self, params: &mut [Parameter]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Nn(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.grad.shape() != m.shape() {
                return Err(Error::Nn(format!(
                    "parameter {} changed shape {:?} -> {:?}",
                    p.name,
                    m.shape(),
                    p.grad.shape()
                )));
            }
            let g = p.grad.data();
            let w = p.value.data_mut();
            for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = vec![Parameter::new("w", Tensor::scalar(3.0))];
        params[0].grad = Tensor::scalar(6.0);
        let mut adam = AdamState::new(AdamConfig::default(), &params);
        adam.step(&mut params).unwrap();
        // m_hat = 6, v_hat = 36, step = lr * 6 / (6 + 1e-8)
        let want = 3.0 - 0.001 * 6.0 / (6.0 + 1e-8);
        assert!((params[0].value.item() - want).abs() < 1e-15);
        assert!((params[0].value.item() - 2.999).abs() < 1e-9);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = vec![Parameter::new("w", Tensor::from_rows(&[[2.0, -3.0]]).unwrap())];
        let mut adam = AdamState::new(AdamConfig { lr: 0.05, ..AdamConfig::default() }, &params);
        for _ in 0..2000 {
            let g = params[0].value.scale(2.0);
            params[0].grad = g;
            adam.step(&mut params).unwrap();
        }
        assert!(params[0].value.data().iter().all(|v| v.abs() < 1e-3));
    }
}
