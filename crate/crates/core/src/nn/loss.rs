use super::tensor::{Scalar, Tensor};
use crate::error::{bail, Result};

#[derive(Debug, Clone)]
pub struct SoftmaxCe<T> {
    /// Mean negative log-likelihood over the batch.
    pub loss: T,
    /// Gradient of `loss` with respect to the logits.
    pub grad: Tensor<T>,
    pub probs: Tensor<T>,
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    logits.expect_rank(2, "softmax logits")?;
    let k = logits.dim(1);
    let mut p = logits.clone();
    for row in p.data_mut().chunks_mut(k.max(1)) {
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok(p)
}

pub fn softmax_ce<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<SoftmaxCe<T>> {
    logits.expect_rank(2, "softmax logits")?;
    let (n, k) = (logits.dim(0), logits.dim(1));
    if k < 2 {
        bail!(Argument, "softmax_ce: need at least 2 classes, got {k}");
    }
    if labels.len() != n {
        bail!(Argument, "softmax_ce: {} labels for {n} rows", labels.len());
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        bail!(Argument, "softmax_ce: label {bad} out of range for {k} classes");
    }
    let probs = softmax(logits)?;
    let nf = T::from_usize(n.max(1)).unwrap();
    let mut loss = T::zero();
    let mut grad = probs.clone();
    for (i, (&label, row)) in labels.iter().zip(logits.data().chunks(k)).enumerate() {
        // log-sum-exp form keeps the loss finite for confident rows
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss = loss + (lse - row[label]);
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        g[label] = g[label] - T::one();
        for v in g.iter_mut() {
            *v = *v / nf;
        }
    }
    Ok(SoftmaxCe {
        loss: loss / nf,
        grad,
        probs,
    })
}
