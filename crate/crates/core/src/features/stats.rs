//! First-order statistics of a plane.

use std::f64::consts::PI;

use crate::colorspace::Plane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStats {
    pub mean: f64,
    pub std: f64,
    /// Population variance.
    pub variance: f64,
    /// Raw second moment, E[x^2].
    pub moment2: f64,
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn plane_stats(plane: &Plane) -> PlaneStats {
    let v = plane.data();
    let n = v.len() as f64;
    let (lo, hi) = min_max(v);
    if lo == hi {
        return PlaneStats {
            mean: lo,
            std: 0.0,
            variance: 0.0,
            moment2: lo * lo,
        };
    }
    let moment2 = v.iter().map(|x| x * x).sum::<f64>() / n;
    let mean = v.iter().sum::<f64>() / n;
    let variance = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    PlaneStats {
        mean,
        std: variance.sqrt(),
        variance,
        moment2,
    }
}

/// Shape and order statistics beyond the first two moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeStats {
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// Interquartile range with linear interpolation between order statistics.
    pub iqr: f64,
    /// Entropy (nats) of the histogram over `HIST_BINS` equal bins of [0, 1].
    pub hist_entropy: f64,
}

pub const HIST_BINS: usize = 8;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn shape_stats(plane: &Plane) -> ShapeStats {
    let v = plane.data();
    let n = v.len() as f64;
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);

    let mut hist = [0usize; HIST_BINS];
    for &x in v {
        hist[super::quantize_value(x, HIST_BINS)] += 1;
    }
    let hist_entropy = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>();

    let (skewness, kurtosis) = if min == max {
        (0.0, 0.0)
    } else {
        let mean = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    ShapeStats {
        skewness,
        kurtosis,
        min,
        max,
        median: quantile(&sorted, 0.5),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
        hist_entropy: hist_entropy.max(0.0),
    }
}

/// Circular mean (as a fraction of a turn in [0, 1)) and mean resultant
/// length of values that represent angles divided by 2*pi.
pub fn circular_stats(plane: &Plane) -> (f64, f64) {
    let n = plane.len() as f64;
    let (s, c) = plane.data().iter().fold((0.0, 0.0), |(s, c), &h| {
        let a = 2.0 * PI * h;
        (s + a.sin(), c + a.cos())
    });
    let (s, c) = (s / n, c / n);
    let r = (s * s + c * c).sqrt().min(1.0);
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let mean = s.atan2(c) / (2.0 * PI);
    (if mean < 0.0 { mean + 1.0 } else { mean }.min(1.0 - f64::EPSILON), r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_plane() {
        let s = plane_stats(&Plane::filled(28, 28, 0.3));
        assert_eq!((s.mean, s.std, s.variance), (0.3, 0.0, 0.0));
        assert_eq!(s.moment2, 0.3 * 0.3);
        let sh = shape_stats(&Plane::filled(28, 28, 0.3));
        assert_eq!((sh.skewness, sh.kurtosis, sh.iqr, sh.hist_entropy), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(sh.median, 0.3);
    }

    #[test]
    fn two_point_plane() {
        let p = Plane::from_fn(4, 4, |y, x| ((y + x) % 2) as f64);
        let s = plane_stats(&p);
        assert_eq!((s.mean, s.variance, s.moment2, s.std), (0.5, 0.25, 0.5, 0.5));
        let sh = shape_stats(&p);
        assert_eq!(sh.skewness, 0.0);
        assert_eq!(sh.kurtosis, -2.0);
        assert!((sh.hist_entropy - 2f64.ln()).abs() < 1e-15);
        assert_eq!((sh.min, sh.max, sh.median, sh.iqr), (0.0, 1.0, 0.5, 1.0));
    }

    #[test]
    fn moment_identity() {
        let p = Plane::from_fn(28, 28, |y, x| ((y * 31 + x * 17) % 97) as f64 / 96.0);
        let s = plane_stats(&p);
        assert!((s.moment2 - (s.variance + s.mean * s.mean)).abs() < 1e-12);
    }

    #[test]
    fn circular_mean_wraps() {
        let p = Plane::new(1, 2, vec![0.95, 0.05]).unwrap();
        let (m, r) = circular_stats(&p);
        assert!(m < 1e-12 || m > 1.0 - 1e-12);
        assert!((r - (0.1 * PI).cos()).abs() < 1e-12);
        let (m, _) = circular_stats(&Plane::filled(2, 2, 0.25));
        assert!((m - 0.25).abs() < 1e-12);
    }
}
