use serde::{Deserialize, Serialize};

use super::Param;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update per parameter; gradients are zeroed.
    pub fn step(&self, params: &mut [&mut Param]) {
        for p in params.iter_mut() {
            p.step += 1;
            let t = p.step as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let n = p.value.len();
            for i in 0..n {
                let g = p.grad.data()[i];
                let m = self.beta1 * p.m.data()[i] + (1.0 - self.beta1) * g;
                let v = self.beta2 * p.v.data()[i] + (1.0 - self.beta2) * g * g;
                p.m.data_mut()[i] = m;
                p.v.data_mut()[i] = v;
                let update = self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
                p.value.data_mut()[i] -= update;
            }
            p.zero_grad();
        }
    }
}

/// Convenience wrapper over [`Adam::step`] with the usual defaults.
pub fn adam_step(params: &mut [&mut Param], lr: f64) {
    Adam::new(lr).step(params);
}
