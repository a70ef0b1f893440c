//! Haralick-style descriptors of a normalized co-occurrence matrix. Levels are
//! indexed from 0.

use super::cooccurrence::CooccurrenceMatrix;
use crate::error::{bail, Result};

/// Tolerance on `sum(P) == 1` accepted by [`haralick`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Haralick {
    /// Mean of the row marginal.
    pub glcm_mean: f64,
    pub autoc: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub covariance: f64,
    /// Angular second moment, sum of P^2.
    pub energy: f64,
    pub entropy: f64,
    /// Sum of P / (1 + |i - j|).
    pub homogeneity: f64,
    pub maxprob: f64,
    pub variance: f64,
    /// Sum of squares variance of the sum distribution.
    pub sosvh: f64,
    pub sum_average: f64,
    pub sum_entropy: f64,
    pub diff_variance: f64,
    pub diff_entropy: f64,
    pub dissimilarity: f64,
    pub cluster_shade: f64,
    pub cluster_prominence: f64,
    /// Inverse difference moment, sum of P / (1 + (i - j)^2).
    pub idm: f64,
    /// Inverse difference normalized by the level count.
    pub idn: f64,
    /// Inverse difference moment normalized by the squared level count.
    pub idmn: f64,
    /// First information measure of correlation.
    pub imc1: f64,
    /// Second information measure of correlation.
    pub imc2: f64,
    /// Sum over i != j of P / (i - j)^2.
    pub inverse_variance: f64,
}

/// Statistic names in catalog order, parallel to [`Haralick::values`].
pub const HARALICK_NAMES: [&str; 24] = [
    "mean",
    "autoc",
    "contrast",
    "correlation",
    "covariance",
    "energy",
    "entropy",
    "homogeneity",
    "maxprob",
    "variance",
    "sosvh",
    "sum_average",
    "sum_entropy",
    "diff_variance",
    "diff_entropy",
    "dissimilarity",
    "cluster_shade",
    "cluster_prominence",
    "idm",
    "idn",
    "idmn",
    "imc1",
    "imc2",
    "inverse_variance",
];

impl Haralick {
    pub fn values(&self) -> [f64; 24] {
        [
            self.glcm_mean,
            self.autoc,
            self.contrast,
            self.correlation,
            self.covariance,
            self.energy,
            self.entropy,
            self.homogeneity,
            self.maxprob,
            self.variance,
            self.sosvh,
            self.sum_average,
            self.sum_entropy,
            self.diff_variance,
            self.diff_entropy,
            self.dissimilarity,
            self.cluster_shade,
            self.cluster_prominence,
            self.idm,
            self.idn,
            self.idmn,
            self.imc1,
            self.imc2,
            self.inverse_variance,
        ]
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

pub fn haralick(m: &CooccurrenceMatrix) -> Result<Haralick> {
    let l = m.levels;
    if m.p.len() != l * l {
        bail!(Contract, "co-occurrence table has {} entries for {l} levels", m.p.len());
    }
    if m.p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        bail!(Contract, "co-occurrence entries must be finite and non-negative");
    }
    let total: f64 = m.p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        bail!(Contract, "co-occurrence matrix sums to {total}, not 1");
    }
    let p = |i: usize, j: usize| m.p[i * l + j];

    let mut px = vec![0.0; l];
    let mut py = vec![0.0; l];
    let mut p_sum = vec![0.0; 2 * l - 1];
    let mut p_diff = vec![0.0; l];
    for i in 0..l {
        for j in 0..l {
            let v = p(i, j);
            px[i] += v;
            py[j] += v;
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
        }
    }
    let mu_x: f64 = (0..l).map(|i| i as f64 * px[i]).sum();
    let mu_y: f64 = (0..l).map(|j| j as f64 * py[j]).sum();
    let var_x: f64 = (0..l).map(|i| (i as f64 - mu_x).powi(2) * px[i]).sum();
    let var_y: f64 = (0..l).map(|j| (j as f64 - mu_y).powi(2) * py[j]).sum();
    let (sd_x, sd_y) = (var_x.sqrt(), var_y.sqrt());

    let mut h = Haralick {
        glcm_mean: mu_x,
        maxprob: m.p.iter().copied().fold(0.0, f64::max),
        ..Haralick::default()
    };
    let (lf, mut hxy1, mut hxy2) = (l as f64, 0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let v = p(i, j);
            let (fi, fj) = (i as f64, j as f64);
            let d = fi - fj;
            h.autoc += fi * fj * v;
            h.contrast += d * d * v;
            h.energy += v * v;
            h.entropy -= plogp(v);
            h.homogeneity += v / (1.0 + d.abs());
            h.variance += (fi - mu_x).powi(2) * v;
            h.dissimilarity += d.abs() * v;
            let s = fi + fj - mu_x - mu_y;
            h.cluster_shade += s.powi(3) * v;
            h.cluster_prominence += s.powi(4) * v;
            h.idm += v / (1.0 + d * d);
            h.idn += v / (1.0 + d.abs() / lf);
            h.idmn += v / (1.0 + d * d / (lf * lf));
            if i != j {
                h.inverse_variance += v / (d * d);
            }
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= v * q.ln();
                hxy2 -= plogp(q);
            }
        }
    }
    h.covariance = h.autoc - mu_x * mu_y;
    h.correlation = if sd_x > 0.0 && sd_y > 0.0 {
        h.covariance / (sd_x * sd_y)
    } else {
        0.0
    };
    h.sum_average = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    h.sosvh = p_sum
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - h.sum_average).powi(2) * v)
        .sum();
    h.sum_entropy = -p_sum.iter().map(|&v| plogp(v)).sum::<f64>();
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    h.diff_variance = p_diff
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - diff_mean).powi(2) * v)
        .sum();
    h.diff_entropy = -p_diff.iter().map(|&v| plogp(v)).sum::<f64>();

    let hx = -px.iter().map(|&v| plogp(v)).sum::<f64>();
    let hy = -py.iter().map(|&v| plogp(v)).sum::<f64>();
    let hmax = hx.max(hy);
    h.imc1 = if hmax > 0.0 {
        (h.entropy - hxy1) / hmax
    } else {
        0.0
    };
    h.imc2 = (1.0 - (-2.0 * (hxy2 - h.entropy)).exp()).max(0.0).sqrt();
    Ok(h)
}
