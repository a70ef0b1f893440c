//! Ordered feature identifiers. Layout is documented in
//! `docs/feature_catalog.md`; bump [`CATALOG_VERSION`] on any change.

use std::sync::OnceLock;

use super::haralick::HARALICK_NAMES;
use crate::error::{bail, Result};

pub const CATALOG_VERSION: u32 = 1;
pub const CATALOG_LEN: usize = 150;
pub const SELECTED_LEN: usize = 22;

pub const CHANNEL_NAMES: [&str; 4] = ["H", "S", "I", "NIR"];

pub const PLANE_STATS: [&str; 12] = [
    "mean",
    "std",
    "variance",
    "moment2",
    "dct",
    "skewness",
    "kurtosis",
    "min",
    "max",
    "median",
    "iqr",
    "hist_entropy",
];

pub const HUE_CIRCULAR: [&str; 2] = ["H.plane.circ_mean", "H.plane.circ_concentration"];

pub const INDEX_NAMES: [&str; 4] = ["NDVI", "EVI", "ARVI", "SR"];

/// The 22 ranked features, best first.
pub const SELECTED: [&str; SELECTED_LEN] = [
    "I.ccm.mean",
    "H.ccm.sosvh",
    "H.ccm.autoc",
    "S.ccm.mean",
    "H.ccm.mean",
    "SR",
    "S.ccm.energy",
    "I.ccm.energy",
    "I.plane.moment2",
    "I.plane.variance",
    "NIR.plane.std",
    "I.plane.std",
    "H.plane.std",
    "H.plane.mean",
    "I.plane.mean",
    "S.plane.mean",
    "I.ccm.covariance",
    "NIR.plane.mean",
    "ARVI",
    "NDVI",
    "I.plane.dct",
    "EVI",
];

/// All 150 identifiers: per-channel plane statistics, hue circular
/// statistics, per-channel co-occurrence statistics, vegetation indices.
pub fn names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut v = Vec::with_capacity(CATALOG_LEN);
        for ch in CHANNEL_NAMES {
            for s in PLANE_STATS {
                v.push(format!("{ch}.plane.{s}"));
            }
        }
        v.extend(HUE_CIRCULAR.iter().map(|s| s.to_string()));
        for ch in CHANNEL_NAMES {
            for s in HARALICK_NAMES {
                v.push(format!("{ch}.ccm.{s}"));
            }
        }
        v.extend(INDEX_NAMES.iter().map(|s| s.to_string()));
        v
    })
}

pub fn selected_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| SELECTED.iter().map(|s| s.to_string()).collect())
}

pub fn position(name: &str) -> Result<usize> {
    match names().iter().position(|n| n == name) {
        Some(i) => Ok(i),
        None => bail!(Config, "feature '{name}' is not in the catalog"),
    }
}

/// Catalog positions of [`SELECTED`], in rank order.
pub fn selected_positions() -> &'static [usize] {
    static POS: OnceLock<Vec<usize>> = OnceLock::new();
    POS.get_or_init(|| {
        SELECTED
            .iter()
            .map(|n| position(n).expect("selected feature is catalogued"))
            .collect()
    })
}
