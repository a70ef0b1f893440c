//! Orthonormal 2-D DCT-II and the scalar texture descriptor built on it.

use std::f64::consts::PI;

use crate::colorspace::Plane;

/// `n x n` orthonormal DCT-II matrix, `c[k][m] = a(k) cos(pi (2m + 1) k / 2n)`.
fn basis(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let a = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for m in 0..n {
            c[k * n + m] = a * (PI * (2 * m + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

/// Coefficients `X[u][v]`, row-major, computed separably.
pub fn dct2(plane: &Plane) -> Vec<f64> {
    let (h, w) = (plane.height(), plane.width());
    let (ch, cw) = (basis(h), basis(w));
    let x = plane.data();
    // transform rows: t[y][v] = sum_x cw[v][x] x[y][x]
    let mut t = vec![0.0; h * w];
    for y in 0..h {
        for v in 0..w {
            t[y * w + v] = (0..w).map(|i| cw[v * w + i] * x[y * w + i]).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for v in 0..w {
            out[u * w + v] = (0..h).map(|y| ch[u * h + y] * t[y * w + v]).sum();
        }
    }
    out
}

/// Mean absolute AC coefficient (DC term excluded). Zero for constant planes
/// and for a single pixel.
pub fn dct_feature(plane: &Plane) -> f64 {
    let n = plane.len();
    let first = plane.data()[0];
    if n < 2 || plane.data().iter().all(|&v| v == first) {
        return 0.0;
    }
    let coeffs = dct2(plane);
    coeffs[1..].iter().map(|c| c.abs()).sum::<f64>() / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(plane: &Plane) -> Vec<f64> {
        let (h, w) = (plane.height(), plane.width());
        let a = |k: usize, n: usize| {
            if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            }
        };
        let mut out = vec![0.0; h * w];
        for u in 0..h {
            for v in 0..w {
                let mut s = 0.0;
                for y in 0..h {
                    for x in 0..w {
                        s += plane.get(y, x)
                            * (PI * (2 * y + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                            * (PI * (2 * x + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                    }
                }
                out[u * w + v] = a(u, h) * a(v, w) * s;
            }
        }
        out
    }

    #[test]
    fn matches_direct_summation() {
        let p = Plane::from_fn(7, 5, |y, x| ((y * 13 + x * 7) % 11) as f64 / 10.0);
        for (a, b) in dct2(&p).iter().zip(naive(&p)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_plane_is_zero() {
        assert_eq!(dct_feature(&Plane::filled(28, 28, 0.7)), 0.0);
    }

    #[test]
    fn single_basis_function() {
        let n = 8;
        let c = basis(n);
        let (u, v) = (2, 5);
        let p = Plane::from_fn(n, n, |y, x| c[u * n + y] * c[v * n + x]);
        let got = dct_feature(&p);
        assert!((got - 1.0 / (n * n - 1) as f64).abs() < 1e-12, "{got}");
    }

    #[test]
    fn energy_is_preserved() {
        let p = Plane::from_fn(6, 6, |y, x| ((y * 5 + x * 3) % 7) as f64);
        let e_in: f64 = p.data().iter().map(|v| v * v).sum();
        let e_out: f64 = dct2(&p).iter().map(|v| v * v).sum();
        assert!((e_in - e_out).abs() < 1e-9);
    }
}
