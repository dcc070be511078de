//! Adam for the primal variables and projected gradient ascent (with
//! optional dual restarts) for the Lagrange multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.99;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
            lr: T::from_f64(lr),
            beta1: T::from_f64(ADAM_BETA1),
            beta2: T::from_f64(ADAM_BETA2),
            epsilon: T::from_f64(ADAM_EPSILON),
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state of length {} got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let one = T::one();
        let exponent = i32::try_from(self.t).unwrap_or(i32::MAX);
        let correction1 = one - self.beta1.powi(exponent);
        let correction2 = one - self.beta2.powi(exponent);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p = *p - self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Lagrange multiplier of the BPP constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub lr: f64,
    pub restarts: bool,
}

impl DualState {
    pub fn new(lr: f64, restarts: bool) -> Self {
        Self {
            lambda: 0.0,
            lr,
            restarts,
        }
    }

    /// Ascent on the constraint violation, projected onto `λ ≥ 0`. With
    /// restarts a feasible step (`violation ≤ 0`) resets `λ` to zero.
    pub fn step(&mut self, violation: f64) {
        self.lambda = if self.restarts && violation <= 0.0 {
            0.0
        } else {
            (self.lambda + self.lr * violation).max(0.0)
        };
    }
}
