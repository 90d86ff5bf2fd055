use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp {
            lr: 0.001,
            rho: 0.9,
            eps: 1e-8,
        }
    }
}

impl RmsProp {
    /// `state <- rho * state + (1 - rho) * g^2`, then
    /// `params <- params - lr * g / sqrt(state + eps)`.
    pub fn update(&self, params: &mut [f64], grads: &[f64], state: &mut [f64]) -> Result<()> {
        if params.len() != grads.len() || params.len() != state.len() {
            return Err(Error::ShapeMismatch(format!(
                "params {}, grads {}, state {}",
                params.len(),
                grads.len(),
                state.len()
            )));
        }
        for ((p, g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
            *s = self.rho * *s + (1.0 - self.rho) * g * g;
            *p -= self.lr * g / (*s + self.eps).sqrt();
        }
        Ok(())
    }
}
