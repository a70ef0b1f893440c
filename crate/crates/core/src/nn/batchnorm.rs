//! Batch normalization over the feature axis of an `N x D` activation.

use super::dropout::Mode;
use super::tensor::{Scalar, Tensor};
use crate::error::{bail, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    /// Weight of the old running value in each update.
    pub momentum: f64,
    pub epsilon: f64,
}

/// Values saved by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
}

/// Biased batch mean and variance of one training forward pass.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(width: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: Tensor::filled(&[width], T::one()),
            beta: Tensor::zeros(&[width]),
            running_mean: Tensor::zeros(&[width]),
            running_var: Tensor::filled(&[width], T::one()),
            momentum,
            epsilon,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    /// Training mode normalizes with batch statistics and folds them into the
    /// running averages (unbiased variance). Inference mode reads only the
    /// running averages.
    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
        match mode {
            Mode::Inference => Ok((self.infer(x)?, None)),
            Mode::Train => {
                let (y, cache, stats) = self.normalize_batch(x)?;
                self.update_running(&stats);
                Ok((y, Some(cache)))
            }
        }
    }

    fn check_width(&self, x: &Tensor<T>) -> Result<usize> {
        x.expect_rank(2, "batchnorm input")?;
        if x.dim(1) != self.width() {
            bail!(
                Argument,
                "batchnorm: width {}, expected {}",
                x.dim(1),
                self.width()
            );
        }
        Ok(x.dim(1))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.check_width(x)?;
        let eps = T::from_f64_lossy(self.epsilon);
        let inv: Vec<T> = self
            .running_var
            .data()
            .iter()
            .map(|&v| (v + eps).sqrt().recip())
            .collect();
        let mut y = x.clone();
        for row in y.data_mut().chunks_mut(d.max(1)) {
            for j in 0..d {
                row[j] = self.gamma.data()[j] * (row[j] - self.running_mean.data()[j]) * inv[j]
                    + self.beta.data()[j];
            }
        }
        Ok(y)
    }

    /// Normalizes with batch statistics without touching the running
    /// averages; pair with [`Self::update_running`].
    pub fn normalize_batch(
        &self,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, BatchNormCache<T>, BatchStats<T>)> {
        let d = self.check_width(x)?;
        let n = x.dim(0);
        if n < 2 {
            bail!(Argument, "batchnorm: training needs at least 2 samples, got {n}");
        }
        let eps = T::from_f64_lossy(self.epsilon);
        let nf = T::from_usize(n).unwrap();
        let mut mean = vec![T::zero(); d];
        for row in x.data().chunks(d) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / nf;
        }
        let mut var = vec![T::zero(); d];
        for row in x.data().chunks(d) {
            for j in 0..d {
                let c = row[j] - mean[j];
                var[j] = var[j] + c * c;
            }
        }
        for v in &mut var {
            *v = *v / nf;
        }
        let inv_std: Vec<T> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
        let mut normalized = x.clone();
        let mut y = x.clone();
        for (nrow, yrow) in normalized
            .data_mut()
            .chunks_mut(d)
            .zip(y.data_mut().chunks_mut(d))
        {
            for j in 0..d {
                nrow[j] = (nrow[j] - mean[j]) * inv_std[j];
                yrow[j] = self.gamma.data()[j] * nrow[j] + self.beta.data()[j];
            }
        }
        Ok((
            y,
            BatchNormCache { normalized, inv_std },
            BatchStats {
                mean,
                var,
                count: n,
            },
        ))
    }

    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        let mom = T::from_f64_lossy(self.momentum);
        let rest = T::one() - mom;
        let nf = T::from_usize(stats.count).unwrap();
        let bessel = nf / (nf - T::one());
        for j in 0..self.width() {
            let rm = &mut self.running_mean.data_mut()[j];
            *rm = mom * *rm + rest * stats.mean[j];
            let rv = &mut self.running_var.data_mut()[j];
            *rv = mom * *rv + rest * stats.var[j] * bessel;
        }
    }

    pub fn backward(
        &self,
        upstream: &Tensor<T>,
        cache: &BatchNormCache<T>,
    ) -> Result<BatchNormGrads<T>> {
        if upstream.shape() != cache.normalized.shape() {
            bail!(
                Argument,
                "batchnorm backward: upstream {:?} vs cached {:?}",
                upstream.shape(),
                cache.normalized.shape()
            );
        }
        let (n, d) = (upstream.dim(0), upstream.dim(1));
        let nf = T::from_usize(n).unwrap();
        let mut dgamma = vec![T::zero(); d];
        let mut dbeta = vec![T::zero(); d];
        for (g, xh) in upstream
            .data()
            .chunks(d)
            .zip(cache.normalized.data().chunks(d))
        {
            for j in 0..d {
                dbeta[j] = dbeta[j] + g[j];
                dgamma[j] = dgamma[j] + g[j] * xh[j];
            }
        }
        // dx = gamma * inv_std / N * (N dy - sum(dy) - xhat * sum(dy * xhat))
        let mut dx = upstream.clone();
        for (row, xh) in dx.data_mut().chunks_mut(d).zip(cache.normalized.data().chunks(d)) {
            for j in 0..d {
                let scale = self.gamma.data()[j] * cache.inv_std[j] / nf;
                row[j] = scale * (nf * row[j] - dbeta[j] - xh[j] * dgamma[j]);
            }
        }
        Ok(BatchNormGrads {
            input: dx,
            gamma: Tensor::new(vec![d], dgamma)?,
            beta: Tensor::new(vec![d], dbeta)?,
        })
    }
}
