use super::tensor::{Scalar, Tensor};
use crate::error::{bail, Result};

fn check_shapes<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Result<(usize, usize, usize)> {
    x.expect_rank(2, "dense input")?;
    w.expect_rank(2, "dense weight")?;
    let (n, din) = (x.dim(0), x.dim(1));
    if w.dim(0) != din {
        bail!(
            Argument,
            "dense: input width {din} does not match weight rows {}",
            w.dim(0)
        );
    }
    Ok((n, din, w.dim(1)))
}

/// `y = x W + b` for `x: N x Din`, `W: Din x Dout`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, din, dout) = check_shapes(x, w)?;
    if b.len() != dout {
        bail!(Argument, "dense: bias has {} entries, expected {dout}", b.len());
    }
    let mut y = Tensor::zeros(&[n, dout]);
    for row in y.data_mut().chunks_mut(dout.max(1)) {
        row.copy_from_slice(b.data());
    }
    T::gemm(
        n,
        din,
        dout,
        T::one(),
        x.data(),
        din,
        1,
        w.data(),
        dout,
        1,
        T::one(),
        y.data_mut(),
        dout,
        1,
    );
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    upstream: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (n, din, dout) = check_shapes(x, w)?;
    if upstream.shape() != [n, dout] {
        bail!(
            Argument,
            "dense backward: upstream {:?}, expected [{n}, {dout}]",
            upstream.shape()
        );
    }
    let mut dw = Tensor::zeros(&[din, dout]);
    T::gemm(
        din,
        n,
        dout,
        T::one(),
        x.data(),
        1,
        din,
        upstream.data(),
        dout,
        1,
        T::zero(),
        dw.data_mut(),
        dout,
        1,
    );
    let mut dx = Tensor::zeros(&[n, din]);
    T::gemm(
        n,
        dout,
        din,
        T::one(),
        upstream.data(),
        dout,
        1,
        w.data(),
        1,
        dout,
        T::zero(),
        dx.data_mut(),
        din,
        1,
    );
    let mut db = Tensor::zeros(&[dout]);
    for row in upstream.data().chunks(dout.max(1)) {
        for (acc, &v) in db.data_mut().iter_mut().zip(row) {
            *acc = *acc + v;
        }
    }
    Ok(DenseGrads {
        input: dx,
        weight: dw,
        bias: db,
    })
}

/// Joins bottleneck activations `a` and handcrafted features `b` column-wise.
pub fn concat<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.expect_rank(2, "concat lhs")?;
    b.expect_rank(2, "concat rhs")?;
    let n = a.dim(0);
    if b.dim(0) != n {
        bail!(
            Argument,
            "concat: batch sizes differ ({n} vs {})",
            b.dim(0)
        );
    }
    let (da, db) = (a.dim(1), b.dim(1));
    let mut out = Vec::with_capacity(n * (da + db));
    for i in 0..n {
        out.extend_from_slice(&a.data()[i * da..(i + 1) * da]);
        out.extend_from_slice(&b.data()[i * db..(i + 1) * db]);
    }
    Tensor::new(vec![n, da + db], out)
}

/// Inverse of [`concat`] for gradients: splits off the first `left` columns.
pub fn split_columns<T: Scalar>(g: &Tensor<T>, left: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    g.expect_rank(2, "concat backward")?;
    let (n, d) = (g.dim(0), g.dim(1));
    if left > d {
        bail!(Argument, "concat backward: split {left} exceeds width {d}");
    }
    let right = d - left;
    let mut a = Vec::with_capacity(n * left);
    let mut b = Vec::with_capacity(n * right);
    for row in g.data().chunks(d.max(1)).take(n) {
        a.extend_from_slice(&row[..left]);
        b.extend_from_slice(&row[left..]);
    }
    Ok((Tensor::new(vec![n, left], a)?, Tensor::new(vec![n, right], b)?))
}
