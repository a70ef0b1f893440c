//! Labeled 4-band patch sets, the SATBIN container, stratified splitting and
//! a synthetic texture dataset for runs without the SAT-4/SAT-6 data.
//!
//! SATBIN layout (little-endian):
//!
//! | offset | size | field                           |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `SATB`                    |
//! | 4      | 4    | u32 patch count                 |
//! | 8      | 2    | u16 height                      |
//! | 10     | 2    | u16 width                       |
//! | 12     | 2    | u16 channels (always 4)         |
//! | 14     | 2    | u16 number of classes           |
//! | 16     | 4    | u32 reserved, zero              |
//! | 20     | ...  | pixels, patch-major, row-major, channel-interleaved (R,G,B,NIR) |
//! | ...    | n    | one u8 class index per patch    |

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};

pub const PATCH_SIDE: usize = 28;
pub const CHANNELS: usize = 4;
pub const SATBIN_MAGIC: &[u8; 4] = b"SATB";
pub const SATBIN_HEADER_LEN: usize = 20;

/// Channel order within a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Red = 0,
    Green = 1,
    Blue = 2,
    Nir = 3,
}

/// An `H x W x 4` patch of bytes, channels interleaved per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePatch {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl ImagePatch {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            bail!(Argument, "patch dimensions must be positive");
        }
        if pixels.len() != height * width * CHANNELS {
            bail!(
                Length,
                "{}x{}x{CHANNELS} patch needs {} bytes, got {}",
                height,
                width,
                height * width * CHANNELS,
                pixels.len()
            );
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: vec![0; height * width * CHANNELS],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize, band: Band) -> u8 {
        self.pixels[(y * self.width + x) * CHANNELS + band as usize]
    }

    /// One band scaled to `[0, 1]`, row-major.
    pub fn band_unit(&self, band: Band) -> Vec<f64> {
        self.pixels
            .iter()
            .skip(band as usize)
            .step_by(CHANNELS)
            .map(|&v| v as f64 / 255.0)
            .collect()
    }

    /// Every byte divided by 255, same layout as the patch.
    pub fn to_unit(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| v as f64 / 255.0).collect()
    }
}

/// Patches with class indices in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    patches: Vec<ImagePatch>,
    labels: Vec<u8>,
    num_classes: usize,
}

impl LabeledSet {
    pub fn new(patches: Vec<ImagePatch>, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 || num_classes > 256 {
            bail!(Argument, "num_classes must be in [2, 256], got {num_classes}");
        }
        if patches.len() != labels.len() {
            bail!(
                Length,
                "{} patches but {} labels",
                patches.len(),
                labels.len()
            );
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            bail!(Label, "label {bad} out of range for {num_classes} classes");
        }
        Ok(Self {
            patches,
            labels,
            num_classes,
        })
    }

    pub fn empty(num_classes: usize) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), num_classes)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[ImagePatch] {
        &self.patches
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Height and width of the first patch.
    pub fn patch_dims(&self) -> Option<(usize, usize)> {
        self.patches.first().map(|p| (p.height, p.width))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Patches at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            patches: indices.iter().map(|&i| self.patches[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Serializes to SATBIN bytes.
    pub fn to_satbin(&self) -> Result<Vec<u8>> {
        let (h, w) = self.patch_dims().unwrap_or((PATCH_SIDE, PATCH_SIDE));
        if self.patches.iter().any(|p| (p.height, p.width) != (h, w)) {
            bail!(Argument, "SATBIN needs patches of one size");
        }
        let count = u32::try_from(self.len())
            .map_err(|_| crate::Error::Argument("too many patches for SATBIN".into()))?;
        let (h16, w16) = match (u16::try_from(h), u16::try_from(w)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => bail!(Argument, "patch size {h}x{w} exceeds SATBIN limits"),
        };
        let mut out = Vec::with_capacity(SATBIN_HEADER_LEN + self.len() * (h * w * CHANNELS + 1));
        out.extend_from_slice(SATBIN_MAGIC);
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&h16.to_le_bytes());
        out.extend_from_slice(&w16.to_le_bytes());
        out.extend_from_slice(&(CHANNELS as u16).to_le_bytes());
        out.extend_from_slice(&(self.num_classes as u16).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for p in &self.patches {
            out.extend_from_slice(&p.pixels);
        }
        out.extend_from_slice(&self.labels);
        Ok(out)
    }

    pub fn from_satbin(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SATBIN_HEADER_LEN {
            bail!(Length, "SATBIN header needs {SATBIN_HEADER_LEN} bytes, file has {}", bytes.len());
        }
        if &bytes[0..4] != SATBIN_MAGIC {
            bail!(Format, "bad magic {:?}, expected SATB", &bytes[0..4]);
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
        let u32_at =
            |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
        let count = u32_at(4) as usize;
        let (h, w, c, k) = (u16_at(8), u16_at(10), u16_at(12), u16_at(14));
        if u32_at(16) != 0 {
            bail!(Format, "reserved header field is not zero");
        }
        if c != CHANNELS {
            bail!(Format, "expected {CHANNELS} channels, header says {c}");
        }
        if h == 0 || w == 0 {
            bail!(Format, "zero patch dimension in header");
        }
        if k < 2 {
            bail!(Format, "header declares {k} classes");
        }
        let patch_len = h * w * c;
        let expected = count
            .checked_mul(patch_len + 1)
            .and_then(|v| v.checked_add(SATBIN_HEADER_LEN))
            .ok_or_else(|| crate::Error::Length("declared payload overflows".into()))?;
        if bytes.len() != expected {
            bail!(
                Length,
                "header declares {count} patches ({expected} bytes), file has {}",
                bytes.len()
            );
        }
        let payload = &bytes[SATBIN_HEADER_LEN..SATBIN_HEADER_LEN + count * patch_len];
        let labels = bytes[SATBIN_HEADER_LEN + count * patch_len..].to_vec();
        let patches = payload
            .chunks(patch_len)
            .map(|px| ImagePatch {
                height: h,
                width: w,
                pixels: px.to_vec(),
            })
            .collect();
        Self::new(patches, labels, k)
    }
}

pub fn read_satbin(path: impl AsRef<Path>) -> Result<LabeledSet> {
    let bytes = std::fs::read(path.as_ref())?;
    LabeledSet::from_satbin(&bytes)
}

pub fn write_satbin(set: &LabeledSet, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &set.to_satbin()?)
}

/// Stratified split: each class contributes its share of `fraction` to the
/// first output, with the rounding remainder spread over the classes with the
/// largest fractional parts so the first output holds `round(fraction * n)`.
/// Both outputs keep input order.
pub fn split(set: &LabeledSet, fraction: f64, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        bail!(Argument, "split fraction {fraction} outside (0, 1)");
    }
    if set.is_empty() {
        bail!(Argument, "cannot split an empty set");
    }
    let k = set.num_classes;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in set.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let target = (fraction * set.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|v| fraction * v.len() as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remainder_order: Vec<usize> = (0..k).collect();
    remainder_order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut missing = target.saturating_sub(take.iter().sum());
    for &c in remainder_order.iter().cycle().take(k * 2) {
        if missing == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            missing -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_first = vec![false; set.len()];
    for (c, members) in by_class.iter_mut().enumerate() {
        // partial Fisher-Yates: the first take[c] slots are a uniform sample
        for i in 0..take[c] {
            let j = rng.gen_range(i..members.len());
            members.swap(i, j);
            in_first[members[i]] = true;
        }
    }
    let first: Vec<usize> = (0..set.len()).filter(|&i| in_first[i]).collect();
    let second: Vec<usize> = (0..set.len()).filter(|&i| !in_first[i]).collect();
    Ok((set.subset(&first), set.subset(&second)))
}

/// Standard normal draws by Box-Muller. `libm` supplies the transcendental
/// functions so generated bytes are identical on every platform.
struct Gauss {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gauss {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = (-2.0 * libm::log(u1)).sqrt();
        let a = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(a));
        r * libm::cos(a)
    }
}

/// Per-class generator parameters.
#[derive(Debug, Clone)]
struct ClassStyle {
    /// Mean gray level per band (R, G, B, NIR).
    means: [f64; 4],
    /// Lag-one autocorrelation of the texture field along rows and columns.
    smoothness: f64,
}

fn class_styles(k: usize) -> Vec<ClassStyle> {
    let span = (k - 1) as f64;
    (0..k)
        .map(|c| {
            let t = |perm: usize| ((c * perm + perm / 2) % k) as f64 / span;
            ClassStyle {
                means: [
                    70.0 + 90.0 * t(3),
                    80.0 + 80.0 * t(5),
                    60.0 + 70.0 * t(1),
                    50.0 + 160.0 * c as f64 / span,
                ],
                smoothness: 0.05 + 0.85 * ((c * (k - 1) + 1) % k) as f64 / span,
            }
        })
        .collect()
}

const SYNTH_BRIGHTNESS_JITTER: f64 = 30.0;
const SYNTH_TEXTURE_AMPLITUDE: f64 = 32.0;
const SYNTH_SMOOTHNESS_JITTER: f64 = 0.04;
const SYNTH_PIXEL_NOISE: f64 = 4.0;

fn synth_patch(rng: &mut Gauss, style: &ClassStyle) -> ImagePatch {
    let n = PATCH_SIDE;
    let phi = (style.smoothness + SYNTH_SMOOTHNESS_JITTER * rng.next()).clamp(0.0, 0.97);
    let innov = (1.0 - phi * phi).sqrt();
    // separable AR(1) field with unit marginal variance
    let mut field = vec![0.0; n * n];
    for y in 0..n {
        let mut prev = rng.next();
        field[y * n] = prev;
        for x in 1..n {
            prev = phi * prev + innov * rng.next();
            field[y * n + x] = prev;
        }
    }
    for x in 0..n {
        for y in 1..n {
            field[y * n + x] = phi * field[(y - 1) * n + x] + innov * field[y * n + x];
        }
    }
    let offsets: Vec<f64> = (0..CHANNELS)
        .map(|_| SYNTH_BRIGHTNESS_JITTER * rng.next())
        .collect();
    let mut pixels = Vec::with_capacity(n * n * CHANNELS);
    for &f in &field {
        for ch in 0..CHANNELS {
            let v = style.means[ch]
                + offsets[ch]
                + SYNTH_TEXTURE_AMPLITUDE * f
                + SYNTH_PIXEL_NOISE * rng.next();
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    ImagePatch {
        height: n,
        width: n,
        pixels,
    }
}

/// Synthetic 28x28x4 patches whose classes differ both in mean band level and
/// in spatial autocorrelation of a shared texture field. Per-patch brightness
/// jitter blurs the mean signal. Classes are interleaved in output order.
pub fn synth_generate(num_per_class: usize, num_classes: usize, seed: u64) -> Result<LabeledSet> {
    if num_classes != 4 && num_classes != 6 {
        bail!(Argument, "synthetic data supports 4 or 6 classes, got {num_classes}");
    }
    if num_per_class == 0 {
        bail!(Argument, "num_per_class must be positive");
    }
    let styles = class_styles(num_classes);
    let mut rng = Gauss::new(seed);
    let mut patches = Vec::with_capacity(num_per_class * num_classes);
    let mut labels = Vec::with_capacity(num_per_class * num_classes);
    for _ in 0..num_per_class {
        for (c, style) in styles.iter().enumerate() {
            patches.push(synth_patch(&mut rng, style));
            labels.push(c as u8);
        }
    }
    LabeledSet::new(patches, labels, num_classes)
}

/// Builds a set from the documented CSV interchange layout: `images` holds one
/// row of `height * width * 4` integers in `[0, 255]` per patch (row-major,
/// channel-interleaved R,G,B,NIR); `labels` holds either one class index per
/// row or a one-hot row. A non-numeric first line is treated as a header.
pub fn convert_csv(
    images: &str,
    labels: &str,
    height: usize,
    width: usize,
    num_classes: Option<usize>,
) -> Result<LabeledSet> {
    let rows = |text: &str| -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
            .collect();
        if let Some(first) = out.first() {
            if first.iter().any(|s| s.parse::<f64>().is_err()) {
                out.remove(0);
            }
        }
        out
    };
    let image_rows = rows(images);
    let label_rows = rows(labels);
    if image_rows.len() != label_rows.len() {
        bail!(
            Length,
            "{} image rows but {} label rows",
            image_rows.len(),
            label_rows.len()
        );
    }
    let patch_len = height * width * CHANNELS;
    let mut patches = Vec::with_capacity(image_rows.len());
    for (i, row) in image_rows.iter().enumerate() {
        if row.len() != patch_len {
            bail!(Length, "image row {} has {} values, expected {patch_len}", i + 1, row.len());
        }
        let px = row
            .iter()
            .map(|s| {
                let v: f64 = s
                    .parse()
                    .map_err(|_| crate::Error::Format(format!("image row {}: '{s}'", i + 1)))?;
                if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                    bail!(Format, "image row {}: pixel {v} is not a byte", i + 1);
                }
                Ok(v as u8)
            })
            .collect::<Result<Vec<u8>>>()?;
        patches.push(ImagePatch::new(height, width, px)?);
    }
    let one_hot = label_rows.first().is_some_and(|r| r.len() > 1);
    let mut out_labels = Vec::with_capacity(label_rows.len());
    for (i, row) in label_rows.iter().enumerate() {
        let vals = row
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| crate::Error::Format(format!("label row {}: '{s}'", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = if one_hot {
            let hot: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] == 1.0).collect();
            if hot.len() != 1 || vals.iter().any(|&v| v != 0.0 && v != 1.0) {
                bail!(Label, "label row {} is not one-hot", i + 1);
            }
            hot[0]
        } else {
            let v = vals[0];
            if v < 0.0 || v.fract() != 0.0 || v > 255.0 {
                bail!(Label, "label row {}: {v} is not a class index", i + 1);
            }
            v as usize
        };
        out_labels.push(label as u8);
    }
    let k = match num_classes {
        Some(k) => k,
        None if one_hot => label_rows[0].len(),
        None => out_labels.iter().map(|&l| l as usize + 1).max().unwrap_or(2).max(2),
    };
    LabeledSet::new(patches, out_labels, k)
}
