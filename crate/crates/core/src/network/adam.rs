use ndarray::Zip;

use super::{check_layer_shapes, next_revision, Dense, Gradients, ModelParameters};
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// Adam moments and hyperparameters for one [`ModelParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub(super) first_moments: Vec<Dense>,
    pub(super) second_moments: Vec<Dense>,
    pub(super) step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(params: &ModelParameters, learning_rate: f64) -> Self {
        Self::with_hyperparameters(params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(
        params: &ModelParameters,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        let zeros: Vec<Dense> = params
            .layers()
            .iter()
            .map(|l| Dense::zeros(l.inputs(), l.outputs()))
            .collect();
        OptimizerState {
            first_moments: zeros.clone(),
            second_moments: zeros,
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moments(&self) -> &[Dense] {
        &self.first_moments
    }

    pub fn second_moments(&self) -> &[Dense] {
        &self.second_moments
    }

    /// One bias-corrected Adam update of `params`.
    pub fn adam_step(&mut self, params: &mut ModelParameters, grads: &Gradients) -> Result<()> {
        check_layer_shapes(params.layers(), &grads.layers)?;
        check_layer_shapes(params.layers(), &self.first_moments)?;
        if grads.values().any(|g| !g.is_finite()) {
            return Err(Error::domain("non-finite gradient"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let update = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        params.revision = next_revision();
        for (((layer, g), m), v) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first_moments)
            .zip(&mut self.second_moments)
        {
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(update);
        }
        Ok(())
    }
}
