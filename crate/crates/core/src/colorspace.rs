//! Real-valued image planes and the RGB to hue/saturation/intensity
//! conversion.

use std::f64::consts::PI;

use crate::dataset::{Band, ImagePatch};
use crate::error::{bail, Result};

/// A single-channel `height x width` grid of reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            bail!(Argument, "plane dimensions must be positive");
        }
        if data.len() != height * width {
            bail!(
                Argument,
                "{height}x{width} plane needs {} values, got {}",
                height * width,
                data.len()
            );
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsiPlanes {
    /// Hue angle divided by 2*pi.
    pub hue: Plane,
    pub saturation: Plane,
    pub intensity: Plane,
}

/// Hue, saturation and intensity of one pixel with channels in `[0, 1]`.
/// Achromatic pixels get hue 0; black pixels get saturation 0.
pub fn hsi_pixel(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let sum = r + g + b;
    let intensity = sum / 3.0;
    let saturation = if sum > 0.0 {
        (1.0 - 3.0 * r.min(g).min(b) / sum).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let num = (r - g) + (r - b);
    let den = 2.0 * ((r - g) * (r - g) + (r - b) * (g - b)).max(0.0).sqrt();
    let hue = if den > 0.0 {
        let theta = (num / den).clamp(-1.0, 1.0).acos();
        let h = if b <= g { theta } else { 2.0 * PI - theta };
        (h / (2.0 * PI)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (hue, saturation, intensity)
}

pub fn rgb_to_hsi(r: &Plane, g: &Plane, b: &Plane) -> Result<HsiPlanes> {
    let dims = (r.height, r.width);
    if (g.height, g.width) != dims || (b.height, b.width) != dims {
        bail!(
            Argument,
            "channel planes differ in size: {:?}, {:?}, {:?}",
            dims,
            (g.height, g.width),
            (b.height, b.width)
        );
    }
    let n = r.len();
    let (mut h, mut s, mut i) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for k in 0..n {
        let (hh, ss, ii) = hsi_pixel(r.data[k], g.data[k], b.data[k]);
        h.push(hh);
        s.push(ss);
        i.push(ii);
    }
    let plane = |data| Plane {
        height: dims.0,
        width: dims.1,
        data,
    };
    Ok(HsiPlanes {
        hue: plane(h),
        saturation: plane(s),
        intensity: plane(i),
    })
}

/// Unit-scaled plane of one band of a patch.
pub fn band_plane(patch: &ImagePatch, band: Band) -> Plane {
    Plane {
        height: patch.height(),
        width: patch.width(),
        data: patch.band_unit(band),
    }
}

/// H, S, I and NIR planes of a patch, in that order.
pub fn hsin_planes(patch: &ImagePatch) -> [Plane; 4] {
    let r = band_plane(patch, Band::Red);
    let g = band_plane(patch, Band::Green);
    let b = band_plane(patch, Band::Blue);
    let hsi = rgb_to_hsi(&r, &g, &b).expect("bands of one patch share a size");
    [
        hsi.hue,
        hsi.saturation,
        hsi.intensity,
        band_plane(patch, Band::Nir),
    ]
}
