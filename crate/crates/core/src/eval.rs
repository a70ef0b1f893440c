//! Accuracy, confusion matrices, McNemar's paired test and separability
//! summaries.

use std::fmt::Write as _;

use libm::erfc;

use crate::dataset::LabeledSet;
use crate::error::{bail, Result};
use crate::ranking;

/// Smallest p-value reported numerically; anything below prints as
/// `< 2.2e-16`.
pub const P_FLOOR: f64 = 2.2e-16;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        bail!(Argument, "{a} predictions for {b} labels");
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds.len(), labels.len())?;
    if labels.is_empty() {
        bail!(Argument, "accuracy of an empty prediction set");
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `K x K` counts, rows indexed by true class and columns by prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Header `true,pred_0,..,pred_{K-1}` then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true");
        for j in 0..self.k {
            let _ = write!(s, ",pred_{j}");
        }
        s.push('\n');
        for i in 0..self.k {
            let _ = write!(s, "{i}");
            for j in 0..self.k {
                let _ = write!(s, ",{}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    check_lengths(preds.len(), labels.len())?;
    let mut counts = vec![0u64; k * k];
    for (&p, &l) in preds.iter().zip(labels) {
        if l >= k || p >= k {
            bail!(Argument, "class index {} out of range for {k} classes", l.max(p));
        }
        counts[l * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemarResult {
    /// Samples classifier A gets right and B gets wrong.
    pub b: u64,
    /// Samples classifier A gets wrong and B gets right.
    pub c: u64,
    pub chi2: f64,
    pub p_two_tailed: f64,
    pub corrected: bool,
}

impl McNemarResult {
    pub fn p_display(&self) -> String {
        if self.p_two_tailed < P_FLOOR {
            "< 2.2e-16".to_string()
        } else {
            format!("{}", self.p_two_tailed)
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "b,c,chi2,df,p_two_tailed,continuity_corrected\n{},{},{},1,{},{}\n",
            self.b,
            self.c,
            self.chi2,
            self.p_display(),
            self.corrected
        )
    }
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_1_upper_tail(chi2: f64) -> f64 {
    if chi2 <= 0.0 {
        return 1.0;
    }
    erfc((chi2 / 2.0).sqrt()).clamp(0.0, 1.0)
}

/// McNemar statistic from the discordant counts. The corrected form is
/// `(max(|b - c| - 1, 0))^2 / (b + c)`.
pub fn mcnemar_counts(b: u64, c: u64, corrected: bool) -> McNemarResult {
    let n = b + c;
    let chi2 = if n == 0 {
        0.0
    } else {
        let diff = b.abs_diff(c) as f64;
        let d = if corrected { (diff - 1.0).max(0.0) } else { diff };
        d * d / n as f64
    };
    McNemarResult {
        b,
        c,
        chi2,
        p_two_tailed: chi2_1_upper_tail(chi2),
        corrected,
    }
}

pub fn mcnemar(
    preds_a: &[usize],
    preds_b: &[usize],
    labels: &[usize],
    corrected: bool,
) -> Result<McNemarResult> {
    check_lengths(preds_a.len(), labels.len())?;
    check_lengths(preds_b.len(), labels.len())?;
    let (mut b, mut c) = (0u64, 0u64);
    for ((&pa, &pb), &l) in preds_a.iter().zip(preds_b).zip(labels) {
        match (pa == l, pb == l) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c, corrected))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityRow {
    pub dataset: String,
    /// `raw` or `features`.
    pub kind: String,
    pub delta_mean: f64,
    pub delta_sigma: f64,
}

/// Raw-pixel row, plus a feature row when a feature matrix is supplied.
pub fn separability_report(
    dataset: &str,
    set: &LabeledSet,
    features: Option<&[Vec<f64>]>,
) -> Result<Vec<SeparabilityRow>> {
    let raw = ranking::raw_separability(set)?;
    let mut rows = vec![SeparabilityRow {
        dataset: dataset.to_string(),
        kind: "raw".to_string(),
        delta_mean: raw.delta_mean,
        delta_sigma: raw.delta_sigma,
    }];
    if let Some(matrix) = features {
        let labels: Vec<usize> = set.labels().iter().map(|&l| l as usize).collect();
        let f = ranking::feature_separability(matrix, &labels, set.num_classes())?;
        rows.push(SeparabilityRow {
            dataset: dataset.to_string(),
            kind: "features".to_string(),
            delta_mean: f.delta_mean,
            delta_sigma: f.delta_sigma,
        });
    }
    Ok(rows)
}

pub fn separability_csv(rows: &[SeparabilityRow]) -> String {
    let mut s = String::from("dataset,type,delta_mean,delta_sigma\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.dataset, r.kind, r.delta_mean, r.delta_sigma);
    }
    s
}
