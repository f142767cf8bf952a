use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::{Error, Result};

/// Adam optimizer state with bias-corrected moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameterized>(params: &P, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn update<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.tensors();
        let mut p = params.tensors_mut();
        if g.len() != p.len() || p.len() != self.first_moment.len() {
            return Err(Error::shape("adam tensors", self.first_moment.len(), p.len()));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (pt, gt)) in p.iter_mut().zip(&g).enumerate() {
            let (m, v) = (&mut self.first_moment[k], &mut self.second_moment[k]);
            if pt.data.len() != gt.data.len() || m.len() != gt.data.len() {
                return Err(Error::shape(pt.name.clone(), m.len(), gt.data.len()));
            }
            for i in 0..m.len() {
                let gi = gt.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                pt.data[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

pub fn adam_update<P: Parameterized>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    state.update(params, grads)
}
