//! Stride-1 2-D convolution over NHWC batches, lowered to matrix products
//! through an im2col buffer.

use rayon::prelude::*;

use super::tensor::{Scalar, Tensor};
use crate::error::{bail, Result};

/// Samples per gradient partial sum. Partial kernel gradients are summed in
/// chunk order so results do not depend on the worker count.
const REDUCTION_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output shrinks by `k - 1`.
    Valid,
    /// Zero padding keeping the spatial size (odd kernels).
    Same,
}

impl Padding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "valid" => Some(Padding::Valid),
            "same" => Some(Padding::Same),
            _ => None,
        }
    }

    pub fn output_size(&self, input: usize, kernel: usize) -> usize {
        match self {
            Padding::Valid => input + 1 - kernel,
            Padding::Same => input,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    pad_top: usize,
    pad_left: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>, padding: Padding) -> Result<Self> {
        input.expect_rank(4, "conv2d input")?;
        kernels.expect_rank(4, "conv2d kernels")?;
        let (n, h, w, cin) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
        let (kh, kw, kcin, cout) = (
            kernels.dim(0),
            kernels.dim(1),
            kernels.dim(2),
            kernels.dim(3),
        );
        if kcin != cin {
            bail!(
                Argument,
                "conv2d: kernel expects {kcin} input channels, input has {cin}"
            );
        }
        if kh == 0 || kw == 0 || cout == 0 {
            bail!(Argument, "conv2d: empty kernel shape {:?}", kernels.shape());
        }
        let (pad_top, pad_left) = match padding {
            Padding::Valid => {
                if kh > h || kw > w {
                    bail!(
                        Argument,
                        "conv2d: kernel {kh}x{kw} larger than input {h}x{w}"
                    );
                }
                (0, 0)
            }
            Padding::Same => {
                if kh % 2 == 0 || kw % 2 == 0 {
                    bail!(Argument, "conv2d: same padding needs odd kernel sizes");
                }
                ((kh - 1) / 2, (kw - 1) / 2)
            }
        };
        Ok(Self {
            n,
            h,
            w,
            cin,
            kh,
            kw,
            cout,
            pad_top,
            pad_left,
            oh: padding.output_size(h, kh),
            ow: padding.output_size(w, kw),
        })
    }

    fn in_size(&self) -> usize {
        self.h * self.w * self.cin
    }

    fn rows(&self) -> usize {
        self.oh * self.ow
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn out_size(&self) -> usize {
        self.rows() * self.cout
    }

    /// Input coordinate for output `o` and kernel tap `k`, if inside the image.
    #[inline]
    fn source(o: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        let pos = o + k;
        if pos < pad || pos - pad >= limit {
            None
        } else {
            Some(pos - pad)
        }
    }
}

fn im2col<T: Scalar>(g: &Geometry, sample: &[T], col: &mut [T]) {
    let plen = g.patch_len();
    let cin = g.cin;
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = (oy * g.ow + ox) * plen;
            for ky in 0..g.kh {
                let iy = Geometry::source(oy, ky, g.pad_top, g.h);
                for kx in 0..g.kw {
                    let dst = row + (ky * g.kw + kx) * cin;
                    let ix = Geometry::source(ox, kx, g.pad_left, g.w);
                    match (iy, ix) {
                        (Some(iy), Some(ix)) => {
                            let src = (iy * g.w + ix) * cin;
                            col[dst..dst + cin].copy_from_slice(&sample[src..src + cin]);
                        }
                        _ => col[dst..dst + cin].fill(T::zero()),
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(g: &Geometry, col: &[T], sample: &mut [T]) {
    let plen = g.patch_len();
    let cin = g.cin;
    sample.fill(T::zero());
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = (oy * g.ow + ox) * plen;
            for ky in 0..g.kh {
                let Some(iy) = Geometry::source(oy, ky, g.pad_top, g.h) else {
                    continue;
                };
                for kx in 0..g.kw {
                    let Some(ix) = Geometry::source(ox, kx, g.pad_left, g.w) else {
                        continue;
                    };
                    let src = row + (ky * g.kw + kx) * cin;
                    let dst = (iy * g.w + ix) * cin;
                    for (d, &s) in sample[dst..dst + cin].iter_mut().zip(&col[src..src + cin]) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// Cross-correlation of an `N x H x W x Cin` batch with `kh x kw x Cin x Cout`
/// kernels plus a per-map bias.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<Tensor<T>> {
    let g = Geometry::new(input, kernels, padding)?;
    if bias.len() != g.cout {
        bail!(
            Argument,
            "conv2d: bias has {} entries, expected {}",
            bias.len(),
            g.cout
        );
    }
    let mut out = Tensor::zeros(&[g.n, g.oh, g.ow, g.cout]);
    if g.n == 0 {
        return Ok(out);
    }
    let kmat = kernels.data();
    let b = bias.data();
    let plen = g.patch_len();
    out.data_mut()
        .par_chunks_mut(REDUCTION_CHUNK * g.out_size())
        .zip(input.data().par_chunks(REDUCTION_CHUNK * g.in_size()))
        .for_each_init(
            || vec![T::zero(); REDUCTION_CHUNK * g.rows() * plen],
            |col, (y, x)| {
                let samples = x.len() / g.in_size();
                let rows = samples * g.rows();
                for (s, xs) in x.chunks(g.in_size()).enumerate() {
                    im2col(&g, xs, &mut col[s * g.rows() * plen..(s + 1) * g.rows() * plen]);
                }
                for row in y.chunks_mut(g.cout) {
                    row.copy_from_slice(b);
                }
                T::gemm(
                    rows,
                    plen,
                    g.cout,
                    T::one(),
                    &col[..rows * plen],
                    plen,
                    1,
                    kmat,
                    g.cout,
                    1,
                    T::one(),
                    y,
                    g.cout,
                    1,
                );
            },
        );
    Ok(out)
}

/// Gradients of a convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    padding: Padding,
) -> Result<ConvGrads<T>> {
    let (dx, kernels, bias) = backward_impl(upstream, input, kernels, padding, true)?;
    Ok(ConvGrads {
        input: dx.expect("input gradient requested"),
        kernels,
        bias,
    })
}

/// Kernel and bias gradients only, for layers whose input needs no gradient.
pub fn conv2d_backward_params<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    padding: Padding,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (_, kernels, bias) = backward_impl(upstream, input, kernels, padding, false)?;
    Ok((kernels, bias))
}

type BackwardParts<T> = (Option<Tensor<T>>, Tensor<T>, Tensor<T>);

fn backward_impl<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    padding: Padding,
    need_input: bool,
) -> Result<BackwardParts<T>> {
    let g = Geometry::new(input, kernels, padding)?;
    if upstream.shape() != [g.n, g.oh, g.ow, g.cout] {
        bail!(
            Argument,
            "conv2d backward: upstream shape {:?} does not match output {:?}",
            upstream.shape(),
            [g.n, g.oh, g.ow, g.cout]
        );
    }
    let plen = g.patch_len();
    let kmat = kernels.data();
    let mut dx = if need_input {
        Tensor::zeros(input.shape())
    } else {
        Tensor::zeros(&[0])
    };
    let in_chunk = REDUCTION_CHUNK * g.in_size().max(1);

    let work = |x_chunk: &[T], dy_chunk: &[T], dx_chunk: Option<&mut [T]>| {
        let samples = x_chunk.len() / g.in_size();
        let rows = samples * g.rows();
        let mut col = vec![T::zero(); rows * plen];
        for (s, xs) in x_chunk.chunks(g.in_size()).enumerate() {
            im2col(&g, xs, &mut col[s * g.rows() * plen..(s + 1) * g.rows() * plen]);
        }
        // dK = col^T * dY over every output position of the chunk
        let mut dk = vec![T::zero(); plen * g.cout];
        T::gemm(
            plen,
            rows,
            g.cout,
            T::one(),
            &col,
            1,
            plen,
            dy_chunk,
            g.cout,
            1,
            T::zero(),
            &mut dk,
            g.cout,
            1,
        );
        let mut db = vec![T::zero(); g.cout];
        for row in dy_chunk.chunks(g.cout) {
            for (acc, &v) in db.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        if let Some(dx_chunk) = dx_chunk {
            // dcol = dY * K^T, reusing the im2col buffer
            T::gemm(
                rows,
                g.cout,
                plen,
                T::one(),
                dy_chunk,
                g.cout,
                1,
                kmat,
                1,
                g.cout,
                T::zero(),
                &mut col,
                plen,
                1,
            );
            for (s, dxs) in dx_chunk.chunks_mut(g.in_size()).enumerate() {
                col2im(&g, &col[s * g.rows() * plen..(s + 1) * g.rows() * plen], dxs);
            }
        }
        (dk, db)
    };

    let x_chunks = input.data().par_chunks(in_chunk);
    let dy_chunks = upstream.data().par_chunks(REDUCTION_CHUNK * g.out_size());
    let partials: Vec<(Vec<T>, Vec<T>)> = if need_input {
        dx.data_mut()
            .par_chunks_mut(in_chunk)
            .zip(x_chunks.zip(dy_chunks))
            .map(|(dxc, (xc, dyc))| work(xc, dyc, Some(dxc)))
            .collect()
    } else {
        x_chunks.zip(dy_chunks).map(|(xc, dyc)| work(xc, dyc, None)).collect()
    };

    let mut dk = Tensor::zeros(kernels.shape());
    let mut db = Tensor::zeros(&[g.cout]);
    for (pk, pb) in &partials {
        for (a, &v) in dk.data_mut().iter_mut().zip(pk) {
            *a = *a + v;
        }
        for (a, &v) in db.data_mut().iter_mut().zip(pb) {
            *a = *a + v;
        }
    }
    Ok((need_input.then_some(dx), dk, db))
}
