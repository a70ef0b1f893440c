//! Vegetation indices averaged over the pixels of a patch.

use crate::dataset::{ImagePatch, CHANNELS};

/// Floor applied to the red reflectance in the simple ratio.
pub const SR_RED_FLOOR: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VegetationIndices {
    pub ndvi: f64,
    pub evi: f64,
    pub arvi: f64,
    pub sr: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-pixel indices of unit reflectances; zero denominators give 0.
pub fn pixel_indices(r: f64, b: f64, nir: f64) -> VegetationIndices {
    let rb = 2.0 * r - b;
    VegetationIndices {
        ndvi: ratio(nir - r, nir + r),
        evi: ratio(2.5 * (nir - r), nir + 6.0 * r - 7.5 * b + 1.0),
        arvi: ratio(nir - rb, nir + rb),
        sr: nir / r.max(SR_RED_FLOOR),
    }
}

pub fn vegetation_indices(patch: &ImagePatch) -> VegetationIndices {
    let mut acc = VegetationIndices {
        ndvi: 0.0,
        evi: 0.0,
        arvi: 0.0,
        sr: 0.0,
    };
    let px = patch.pixels();
    let n = (px.len() / CHANNELS) as f64;
    for p in px.chunks_exact(CHANNELS) {
        let unit = |v: u8| v as f64 / 255.0;
        let v = pixel_indices(unit(p[0]), unit(p[2]), unit(p[3]));
        acc.ndvi += v.ndvi;
        acc.evi += v.evi;
        acc.arvi += v.arvi;
        acc.sr += v.sr;
    }
    VegetationIndices {
        ndvi: acc.ndvi / n,
        evi: acc.evi / n,
        arvi: acc.arvi / n,
        sr: acc.sr / n,
    }
}
