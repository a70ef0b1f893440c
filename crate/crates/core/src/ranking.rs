//! Distribution separability: class-conditional statistics, the D_s score,
//! feature ranking and dataset-level separability summaries.
//!
//! For one scalar feature with class means `mu_c` and standard deviations
//! `sigma_c`, `delta_mean` is the mean of `|mu_c - mu_c'|` over unordered
//! class pairs, `delta_sigma` the mean of `sigma_c`, and
//! `D_s = delta_mean / delta_sigma`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::LabeledSet;
use crate::error::{bail, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Published D_s values for the 22 selected SAT-6 features, best first, keyed
/// by catalog identifier.
pub const REFERENCE_SAT6_DS: [(&str, f64); 22] = [
    ("I.ccm.mean", 2.9403),
    ("H.ccm.sosvh", 2.5413),
    ("H.ccm.autoc", 2.1417),
    ("S.ccm.mean", 1.4099),
    ("H.ccm.mean", 1.1237),
    ("SR", 0.9424),
    ("S.ccm.energy", 0.8354),
    ("I.ccm.energy", 0.8354),
    ("I.plane.moment2", 0.8345),
    ("I.plane.variance", 0.8345),
    ("NIR.plane.std", 0.7980),
    ("I.plane.std", 0.7968),
    ("H.plane.std", 0.7956),
    ("H.plane.mean", 0.7632),
    ("I.plane.mean", 0.7541),
    ("S.plane.mean", 0.7268),
    ("I.ccm.covariance", 0.7228),
    ("NIR.plane.mean", 0.6997),
    ("ARVI", 0.6622),
    ("NDVI", 0.6594),
    ("I.plane.dct", 0.5792),
    ("EVI", 0.3207),
];

/// Published (delta_mean, delta_sigma) pairs: raw pixels, then features.
pub const REFERENCE_SAT4: [(f64, f64); 2] = [(0.1994, 0.1166), (0.8454, 0.0435)];
pub const REFERENCE_SAT6: [(f64, f64); 2] = [(0.3247, 0.1273), (0.9726, 0.0491)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separability {
    pub delta_mean: f64,
    pub delta_sigma: f64,
    pub d_s: f64,
}

fn check_labels(n: usize, labels: &[usize], k: usize) -> Result<()> {
    if n != labels.len() {
        bail!(Argument, "{n} values for {} labels", labels.len());
    }
    if k == 0 {
        bail!(Argument, "class count must be positive");
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        bail!(Argument, "label {bad} out of range for {k} classes");
    }
    Ok(())
}

/// `(v - min) / (max - min)`, or all zeros when the range is empty.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

/// Population mean and standard deviation per class of the min-max
/// normalized values. Sums run over sorted values so the result does not
/// depend on sample order.
pub fn class_stats(values: &[f64], labels: &[usize], k: usize) -> Result<Vec<ClassStats>> {
    check_labels(values.len(), labels, k)?;
    let normalized = min_max_normalize(values);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&v, &l) in normalized.iter().zip(labels) {
        groups[l].push(v);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(c, mut g)| {
            if g.is_empty() {
                bail!(Degenerate, "class {c} has no samples");
            }
            g.sort_by(f64::total_cmp);
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            Ok(ClassStats {
                mean,
                std: var.sqrt(),
            })
        })
        .collect()
}

/// Ratio with `+inf` for a perfectly separated zero-spread feature and 0 when
/// both terms vanish.
pub fn ds_ratio(delta_mean: f64, delta_sigma: f64) -> f64 {
    if delta_sigma > 0.0 {
        delta_mean / delta_sigma
    } else if delta_mean > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn separability(stats: &[ClassStats]) -> Result<Separability> {
    let k = stats.len();
    if k < 2 {
        bail!(Argument, "separability needs at least 2 classes, got {k}");
    }
    let mut dist = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            dist += (stats[i].mean - stats[j].mean).abs();
        }
    }
    let delta_mean = dist / (k * (k - 1) / 2) as f64;
    let delta_sigma = stats.iter().map(|s| s.std).sum::<f64>() / k as f64;
    Ok(Separability {
        delta_mean,
        delta_sigma,
        d_s: ds_ratio(delta_mean, delta_sigma),
    })
}

pub fn feature_ds(values: &[f64], labels: &[usize], k: usize) -> Result<Separability> {
    separability(&class_stats(values, labels, k)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingEntry {
    pub feature: String,
    pub delta_mean: f64,
    pub delta_sigma: f64,
    pub d_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    /// Best first; ties broken by feature name.
    pub entries: Vec<RankingEntry>,
    pub threshold: f64,
}

impl RankingTable {
    pub fn selected(&self) -> Vec<&RankingEntry> {
        self.entries.iter().filter(|e| e.d_s >= self.threshold).collect()
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature == feature).map(|i| i + 1)
    }

    pub fn get(&self, feature: &str) -> Option<&RankingEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,feature,delta_mean,delta_sigma,d_s,selected\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                i + 1,
                e.feature,
                e.delta_mean,
                e.delta_sigma,
                e.d_s,
                e.d_s >= self.threshold
            );
        }
        s
    }
}

/// Scores every column of `rows` and sorts by D_s, best first.
pub fn rank_features(
    names: &[String],
    rows: &[Vec<f64>],
    labels: &[usize],
    k: usize,
    threshold: f64,
) -> Result<RankingTable> {
    if rows.is_empty() || names.is_empty() {
        bail!(Argument, "cannot rank an empty feature matrix");
    }
    if !(threshold >= 0.0) {
        bail!(Argument, "threshold must be non-negative, got {threshold}");
    }
    if rows.iter().any(|r| r.len() != names.len()) {
        bail!(Argument, "feature rows do not match {} names", names.len());
    }
    check_labels(rows.len(), labels, k)?;
    let mut entries = (0..names.len())
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let s = feature_ds(&column, labels, k)?;
            Ok(RankingEntry {
                feature: names[j].clone(),
                delta_mean: s.delta_mean,
                delta_sigma: s.delta_sigma,
                d_s: s.d_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        b.d_s
            .partial_cmp(&a.d_s)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(RankingTable { entries, threshold })
}

/// Dataset-level separability of raw pixels. Each unit-scaled pixel value
/// (every row, column and band) is one dimension; per dimension we take the
/// class means and population standard deviations, then average the mean
/// pairwise distance and the standard deviations over dimensions. Byte sums
/// are accumulated in integers, so the result is exact up to the final
/// division and independent of patch order.
pub fn raw_separability(set: &LabeledSet) -> Result<Separability> {
    let k = set.num_classes();
    let Some((h, w)) = set.patch_dims() else {
        bail!(Argument, "raw separability of an empty set");
    };
    let dims = h * w * crate::dataset::CHANNELS;
    let counts = set.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        bail!(Argument, "raw separability needs at least 2 populated classes");
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        bail!(Degenerate, "class {c} has no samples");
    }
    let mut sum = vec![vec![0u64; dims]; k];
    let mut sum_sq = vec![vec![0u64; dims]; k];
    for (p, &l) in set.patches().iter().zip(set.labels()) {
        if p.pixels().len() != dims {
            bail!(Argument, "patches of mixed sizes");
        }
        let (s, q) = (&mut sum[l as usize], &mut sum_sq[l as usize]);
        for (d, &v) in p.pixels().iter().enumerate() {
            s[d] += v as u64;
            q[d] += (v as u64) * (v as u64);
        }
    }
    let mut means = vec![vec![0.0; dims]; k];
    let mut sigma_total = 0.0;
    for c in 0..k {
        let n = counts[c] as u128;
        for d in 0..dims {
            means[c][d] = sum[c][d] as f64 / counts[c] as f64 / 255.0;
            // n^2 var = n sum(x^2) - (sum x)^2, exact in integers
            let num = n * sum_sq[c][d] as u128 - (sum[c][d] as u128).pow(2);
            sigma_total += (num as f64).sqrt() / (n as f64) / 255.0;
        }
    }
    let pairs = k * (k - 1) / 2;
    let mut dist_total = 0.0;
    for d in 0..dims {
        for i in 0..k {
            for j in i + 1..k {
                dist_total += (means[i][d] - means[j][d]).abs();
            }
        }
    }
    let delta_mean = dist_total / (pairs * dims) as f64;
    let delta_sigma = sigma_total / (k * dims) as f64;
    Ok(Separability {
        delta_mean,
        delta_sigma,
        d_s: ds_ratio(delta_mean, delta_sigma),
    })
}

/// Per-feature `delta_mean` and `delta_sigma` (on min-max normalized values)
/// averaged over the columns of `rows`.
pub fn feature_separability(rows: &[Vec<f64>], labels: &[usize], k: usize) -> Result<Separability> {
    let Some(first) = rows.first() else {
        bail!(Argument, "feature separability of an empty matrix");
    };
    let width = first.len();
    if width == 0 || rows.iter().any(|r| r.len() != width) {
        bail!(Argument, "feature rows must share a positive width");
    }
    let per: Vec<Separability> = (0..width)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            feature_ds(&col, labels, k)
        })
        .collect::<Result<_>>()?;
    let delta_mean = per.iter().map(|s| s.delta_mean).sum::<f64>() / width as f64;
    let delta_sigma = per.iter().map(|s| s.delta_sigma).sum::<f64>() / width as f64;
    Ok(Separability {
        delta_mean,
        delta_sigma,
        d_s: ds_ratio(delta_mean, delta_sigma),
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        bail!(Argument, "spearman needs two equal-length series of at least 2");
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut va, mut vb) = (0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        bail!(Degenerate, "spearman of a constant series");
    }
    Ok(cov / (va * vb).sqrt())
}
