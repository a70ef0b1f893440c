//! Handcrafted per-patch features: plane statistics, a DCT descriptor,
//! co-occurrence statistics on H, S, I and NIR, and vegetation indices.

pub mod catalog;
pub mod cooccurrence;
pub mod dct;
pub mod haralick;
pub mod indices;
pub mod scaler;
pub mod stats;
pub mod table;

use rayon::prelude::*;

pub use catalog::{CATALOG_LEN, CATALOG_VERSION, SELECTED, SELECTED_LEN};
pub use cooccurrence::{
    cooccurrence, quantize, quantize_value, CooccurrenceMatrix, LevelGrid, DEFAULT_LEVELS,
    DEFAULT_OFFSETS,
};
pub use dct::{dct2, dct_feature};
pub use haralick::{haralick, Haralick, HARALICK_NAMES};
pub use indices::{vegetation_indices, VegetationIndices};
pub use scaler::FeatureScaler;
pub use stats::{circular_stats, plane_stats, shape_stats, PlaneStats, ShapeStats};
pub use table::FeatureTable;

use crate::colorspace::{hsin_planes, Plane};
use crate::dataset::{ImagePatch, LabeledSet};
use crate::error::{bail, Result};

/// Values with their catalog names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: &'static [String],
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

fn plane_block(plane: &Plane) -> [f64; 12] {
    let s = plane_stats(plane);
    let sh = shape_stats(plane);
    [
        s.mean,
        s.std,
        s.variance,
        s.moment2,
        dct_feature(plane),
        sh.skewness,
        sh.kurtosis,
        sh.min,
        sh.max,
        sh.median,
        sh.iqr,
        sh.hist_entropy,
    ]
}

/// Co-occurrence statistics with the default 8 levels, four offsets, symmetric.
pub fn ccm_stats(plane: &Plane) -> Result<Haralick> {
    let grid = quantize(plane, DEFAULT_LEVELS)?;
    haralick(&cooccurrence(&grid, &DEFAULT_OFFSETS, true)?)
}

/// The full 150-value catalog vector of one patch.
pub fn extract_all(patch: &ImagePatch) -> Result<FeatureVector> {
    if patch.height() < 2 && patch.width() < 2 {
        bail!(Degenerate, "co-occurrence needs a patch larger than 1x1");
    }
    let planes = hsin_planes(patch);
    let mut values = Vec::with_capacity(CATALOG_LEN);
    for p in &planes {
        values.extend_from_slice(&plane_block(p));
    }
    let (circ_mean, circ_r) = circular_stats(&planes[0]);
    values.push(circ_mean);
    values.push(circ_r);
    for p in &planes {
        values.extend_from_slice(&ccm_stats(p)?.values());
    }
    let vi = vegetation_indices(patch);
    values.extend_from_slice(&[vi.ndvi, vi.evi, vi.arvi, vi.sr]);
    debug_assert_eq!(values.len(), CATALOG_LEN);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        bail!(Degenerate, "feature {} is not finite", catalog::names()[i]);
    }
    Ok(FeatureVector {
        names: catalog::names(),
        values,
    })
}

/// Projects a full vector onto the 22 ranked features, in rank order.
pub fn select22(v: &FeatureVector) -> Result<FeatureVector> {
    let positions: Vec<usize> = if v.names.as_ptr() == catalog::names().as_ptr() {
        catalog::selected_positions().to_vec()
    } else {
        SELECTED
            .iter()
            .map(|name| match v.names.iter().position(|n| n == name) {
                Some(i) => Ok(i),
                None => bail!(Config, "feature '{name}' missing from the input vector"),
            })
            .collect::<Result<_>>()?
    };
    Ok(FeatureVector {
        names: catalog::selected_names(),
        values: positions.iter().map(|&i| v.values[i]).collect(),
    })
}

/// Feature rows for every patch of a set, in set order. Patches are processed
/// in parallel; each row depends only on its patch.
pub fn extract_set(set: &LabeledSet, selected_only: bool) -> Result<FeatureTable> {
    let rows = set
        .patches()
        .par_iter()
        .map(|p| {
            let all = extract_all(p)?;
            Ok(if selected_only {
                select22(&all)?.values
            } else {
                all.values
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let names = if selected_only {
        catalog::selected_names()
    } else {
        catalog::names()
    };
    Ok(FeatureTable {
        names: names.to_vec(),
        rows,
        labels: set.labels().iter().map(|&l| l as usize).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_patch() -> ImagePatch {
        let px = (0..28 * 28 * 4).map(|i| ((i * 37 + i / 7) % 256) as u8).collect();
        ImagePatch::new(28, 28, px).unwrap()
    }

    #[test]
    fn full_vector_is_finite_and_deterministic() {
        let p = sample_patch();
        let a = extract_all(&p).unwrap();
        assert_eq!(a.len(), 150);
        assert!(a.values.iter().all(|v| v.is_finite()));
        let b = extract_all(&p).unwrap();
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn constant_patch_has_zero_spread() {
        let p = ImagePatch::new(28, 28, [90, 140, 60, 200].repeat(28 * 28)).unwrap();
        let v = extract_all(&p).unwrap();
        for (name, value) in v.names.iter().zip(&v.values) {
            let spread = [
                ".std", ".variance", ".contrast", ".dct", ".iqr", ".sosvh", ".dissimilarity",
                ".diff_variance",
            ];
            if spread.iter().any(|s| name.ends_with(s)) {
                assert_eq!(*value, 0.0, "{name}");
            }
        }
    }

    #[test]
    fn selection_order() {
        let all = extract_all(&sample_patch()).unwrap();
        let sel = select22(&all).unwrap();
        assert_eq!(sel.len(), 22);
        assert_eq!(sel.names[0], "I.ccm.mean");
        assert_eq!(sel.names[21], "EVI");
        assert_eq!(sel.values[0], all.get("I.ccm.mean").unwrap());
        let short = FeatureVector {
            names: catalog::selected_names(),
            values: sel.values.clone(),
        };
        assert_eq!(select22(&short).unwrap().values, sel.values);
        static PARTIAL: OnceLock<Vec<String>> = OnceLock::new();
        let names = PARTIAL.get_or_init(|| vec!["I.ccm.mean".to_string()]);
        let bad = FeatureVector {
            names,
            values: vec![0.0],
        };
        assert!(matches!(select22(&bad), Err(crate::Error::Config(_))));
    }

    use std::sync::OnceLock;
}
