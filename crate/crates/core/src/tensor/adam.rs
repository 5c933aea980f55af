//! Adam optimizer state and update step.

use super::Scalar;
use crate::error::{Error, Result};

/// Per-parameter first/second moment estimates plus the shared step count.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    step: u64,
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with the optimizer's standard defaults
    /// (beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn new(param_lens: &[usize]) -> Self {
        Self::with_hyper(param_lens, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(param_lens: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            step: 0,
            beta1: T::from_f64(beta1),
            beta2: T::from_f64(beta2),
            eps: T::from_f64(eps),
            m: param_lens.iter().map(|&l| vec![T::zero(); l]).collect(),
            v: param_lens.iter().map(|&l| vec![T::zero(); l]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update over every parameter array. Rejects the
    /// whole step if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]], lr: T) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam expects {} parameter arrays, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Dimension("adam parameter/gradient shape mismatch".into()));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite gradient; step rejected".into()));
            }
        }

        self.step += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.step as i32);
        let bc2 = one - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (one - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (one - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
