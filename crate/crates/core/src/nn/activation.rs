use super::tensor::{Scalar, Tensor};
use crate::error::{bail, Result};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
    y
}

/// Masks `upstream` by `x > 0`; the subgradient at zero is zero.
pub fn relu_backward<T: Scalar>(upstream: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != x.shape() {
        bail!(
            Argument,
            "relu backward: shapes {:?} and {:?} differ",
            upstream.shape(),
            x.shape()
        );
    }
    let mut dx = upstream.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if !(v > T::zero()) {
            *d = T::zero();
        }
    }
    Ok(dx)
}
