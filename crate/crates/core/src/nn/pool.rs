use super::tensor::{Scalar, Tensor};
use crate::error::{bail, Result};

/// Output of a 2x2 stride-2 max pool with the flat input index of each
/// window's winner.
#[derive(Debug, Clone)]
pub struct Pooled<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

pub fn maxpool2<T: Scalar>(x: &Tensor<T>) -> Result<Pooled<T>> {
    x.expect_rank(4, "maxpool input")?;
    let (n, h, w, c) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    if h % 2 != 0 || w % 2 != 0 {
        bail!(Argument, "maxpool2: spatial dims {h}x{w} must be even");
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    let data = x.data();
    for s in 0..n {
        let base = s * h * w * c;
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    // row-major scan; strict comparison keeps the first maximum
                    let mut best_idx = base + ((2 * oy) * w + 2 * ox) * c + ch;
                    let mut best = data[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if data[idx] > best {
                            best = data[idx];
                            best_idx = idx;
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![n, oh, ow, c], out)?,
        argmax,
    })
}

/// Routes each upstream gradient to the input position that won its window.
pub fn maxpool2_backward<T: Scalar>(
    upstream: &Tensor<T>,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if upstream.len() != argmax.len() {
        bail!(
            Argument,
            "maxpool backward: {} upstream values for {} windows",
            upstream.len(),
            argmax.len()
        );
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&idx, &g) in argmax.iter().zip(upstream.data()) {
        let slot = dx
            .data_mut()
            .get_mut(idx)
            .ok_or_else(|| crate::Error::Argument("maxpool backward: stale argmax".into()))?;
        *slot = *slot + g;
    }
    Ok(dx)
}
