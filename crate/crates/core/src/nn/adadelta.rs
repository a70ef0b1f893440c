//! Adadelta: per-parameter step sizes from decaying averages of squared
//! gradients and squared updates, with no global learning rate.

use super::tensor::Scalar;
use crate::error::{bail, Result};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState<T> {
    /// Running average of squared gradients, E[g^2].
    pub acc_grad_sq: Vec<T>,
    /// Running average of squared updates, E[dx^2].
    pub acc_update_sq: Vec<T>,
    pub rho: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdadeltaState<T> {
    pub fn new(len: usize, rho: f64, epsilon: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            bail!(Argument, "adadelta: rho {rho} outside (0, 1)");
        }
        if !(epsilon > 0.0) {
            bail!(Argument, "adadelta: epsilon must be positive, got {epsilon}");
        }
        Ok(Self {
            acc_grad_sq: vec![T::zero(); len],
            acc_update_sq: vec![T::zero(); len],
            rho,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.acc_grad_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acc_grad_sq.is_empty()
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            bail!(
                Argument,
                "adadelta: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.len()
            );
        }
        let rho = T::from_f64_lossy(self.rho);
        let rest = T::one() - rho;
        let eps = T::from_f64_lossy(self.epsilon);
        for (((p, &g), eg), ex) in params
            .iter_mut()
            .zip(grads)
            .zip(self.acc_grad_sq.iter_mut())
            .zip(self.acc_update_sq.iter_mut())
        {
            *eg = rho * *eg + rest * g * g;
            let dx = -((*ex + eps).sqrt() / (*eg + eps).sqrt()) * g;
            *ex = rho * *ex + rest * dx * dx;
            *p = *p + dx;
        }
        Ok(())
    }
}
