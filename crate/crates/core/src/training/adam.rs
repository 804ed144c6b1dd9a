//! Adam optimizer with bias correction.

use crate::nn::{Model, Scalar};

/// First/second moment accumulators aligned with the model's trainable
/// parameters in traversal order.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

/// Optimizer hyperparameters; defaults are lr 0.001, β1 0.9, β2 0.999,
/// ε 1e-7.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-7 }
    }
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &mut Model<T>) -> Self {
        let mut m = Vec::new();
        model.visit_params(&mut |p| {
            if p.trainable {
                m.push(vec![T::zero(); p.values.len()]);
            }
        });
        let v = m.clone();
        Self { m, v, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update from the gradients currently held in the
/// model's parameter tensors.
pub fn adam_step<T: Scalar>(model: &mut Model<T>, state: &mut AdamState<T>, hyper: &AdamHyper) {
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::c(hyper.beta1);
    let b2 = T::c(hyper.beta2);
    let one = T::one();
    // Fold the bias corrections into one scale per step.
    let corr1 = 1.0 - hyper.beta1.powi(t);
    let corr2 = 1.0 - hyper.beta2.powi(t);
    let lr_t = T::c(hyper.lr / corr1);
    let inv_sqrt_corr2 = T::c(1.0 / corr2.sqrt());
    let eps = T::c(hyper.epsilon);

    let mut idx = 0usize;
    model.visit_params(&mut |p| {
        if !p.trainable {
            return;
        }
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for ((theta, &g), (mi, vi)) in
            p.values.iter_mut().zip(&p.grads).zip(m.iter_mut().zip(v.iter_mut()))
        {
            *mi = b1 * *mi + (one - b1) * g;
            *vi = b2 * *vi + (one - b2) * g * g;
            let denom = (*vi).sqrt() * inv_sqrt_corr2 + eps;
            *theta = *theta - lr_t * *mi / denom;
        }
        idx += 1;
    });
}
