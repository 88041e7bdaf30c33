use alloc::vec::Vec;

use super::mlp::{Mlp, MlpGrads};
use crate::linalg::Mat;

/// Adam optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub(crate) step: u64,
    pub(crate) first: Vec<Mat>,
    pub(crate) second: Vec<Mat>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros: Vec<Mat> = net
            .tensors()
            .iter()
            .map(|t| Mat::zeros(t.nrows(), t.ncols()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Gradient-descent step on `net`.
    pub fn apply(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((param, grad), m), v) in net
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for k in 0..param.len() {
                let g = grad[k];
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                param[k] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
    }
}
