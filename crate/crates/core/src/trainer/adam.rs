//! Sparse Adam over embedding tables.
//!
//! Only rows present in the gradient sink move; the bias correction uses the
//! global step counter, as lazy/sparse Adam variants do.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::{EmbeddingModel, GradSink};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of a parameter row at (1-based) step `step`.
pub fn adam_update_row<F: Scalar>(config: &AdamConfig, step: u64, param: &mut [F], first: &mut [F], second: &mut [F], grad: &[F]) {
    let b1 = F::of(config.beta1);
    let b2 = F::of(config.beta2);
    let lr = F::of(config.learning_rate);
    let eps = F::of(config.eps);
    let c1 = F::one() - F::of(config.beta1.powf(step as f64));
    let c2 = F::one() - F::of(config.beta2.powf(step as f64));
    for i in 0..param.len() {
        let g = grad[i];
        first[i] = b1 * first[i] + (F::one() - b1) * g;
        second[i] = b2 * second[i] + (F::one() - b2) * g * g;
        let m_hat = first[i] / c1;
        let v_hat = second[i] / c2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// First and second moments shaped like the model tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    pub step: u64,
    entity_first: Vec<F>,
    entity_second: Vec<F>,
    relation_first: Vec<F>,
    relation_second: Vec<F>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(model: &EmbeddingModel<F>, config: AdamConfig) -> Self {
        let ne = model.entity_table().len();
        let nr = model.relation_table().len();
        AdamState {
            config,
            step: 0,
            entity_first: vec![F::zero(); ne],
            entity_second: vec![F::zero(); ne],
            relation_first: vec![F::zero(); nr],
            relation_second: vec![F::zero(); nr],
        }
    }

    /// Applies one update from `grads`. Non-finite gradients abort before any
    /// parameter changes.
    pub fn step(&mut self, model: &mut EmbeddingModel<F>, grads: &GradSink<F>) -> Result<()> {
        if self.entity_first.len() != model.entity_table().len()
            || self.relation_first.len() != model.relation_table().len()
        {
            return Err(Error::Dimension {
                expected: self.entity_first.len() + self.relation_first.len(),
                actual: model.entity_table().len() + model.relation_table().len(),
            });
        }
        for (id, g) in grads.entities() {
            if let Some(x) = g.iter().find(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {x} on entity row {id} at step {}",
                    self.step + 1
                )));
            }
        }
        for (id, g) in grads.relations() {
            if let Some(x) = g.iter().find(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {x} on relation row {id} at step {}",
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let d = model.dim();
        for (id, g) in grads.entities() {
            let range = id as usize * d..(id as usize + 1) * d;
            adam_update_row(
                &self.config,
                self.step,
                model.entity_mut(id),
                &mut self.entity_first[range.clone()],
                &mut self.entity_second[range],
                g,
            );
        }
        let dr = model.relation_dim();
        for (id, g) in grads.relations() {
            let range = id as usize * dr..(id as usize + 1) * dr;
            adam_update_row(
                &self.config,
                self.step,
                model.relation_mut(id),
                &mut self.relation_first[range.clone()],
                &mut self.relation_second[range],
                g,
            );
        }
        Ok(())
    }
}
