//! Gray-level quantization and co-occurrence matrices.

use crate::colorspace::Plane;
use crate::error::{bail, Result};

pub const DEFAULT_LEVELS: usize = 8;
/// Right, down, down-right and down-left neighbours as `(dy, dx)`.
pub const DEFAULT_OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

/// `min(floor(v * levels), levels - 1)`, with negatives mapped to 0.
pub fn quantize_value(v: f64, levels: usize) -> usize {
    let q = (v * levels as f64).floor();
    if q <= 0.0 {
        0
    } else {
        (q as usize).min(levels - 1)
    }
}

/// Integer grid with values in `[0, levels)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelGrid {
    pub height: usize,
    pub width: usize,
    pub levels: usize,
    pub data: Vec<usize>,
}

impl LevelGrid {
    pub fn new(height: usize, width: usize, levels: usize, data: Vec<usize>) -> Result<Self> {
        if levels < 2 {
            bail!(Argument, "need at least 2 levels, got {levels}");
        }
        if height == 0 || width == 0 || data.len() != height * width {
            bail!(Argument, "{height}x{width} grid with {} values", data.len());
        }
        if let Some(&bad) = data.iter().find(|&&v| v >= levels) {
            bail!(Argument, "grid value {bad} outside [0, {levels})");
        }
        Ok(Self {
            height,
            width,
            levels,
            data,
        })
    }

    pub fn get(&self, y: usize, x: usize) -> usize {
        self.data[y * self.width + x]
    }
}

pub fn quantize(plane: &Plane, levels: usize) -> Result<LevelGrid> {
    if levels < 2 {
        bail!(Argument, "need at least 2 levels, got {levels}");
    }
    Ok(LevelGrid {
        height: plane.height(),
        width: plane.width(),
        levels,
        data: plane.data().iter().map(|&v| quantize_value(v, levels)).collect(),
    })
}

/// Normalized `L x L` joint distribution of level pairs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub levels: usize,
    pub p: Vec<f64>,
    pub offsets: Vec<(isize, isize)>,
    pub symmetric: bool,
}

impl CooccurrenceMatrix {
    /// Wraps an arbitrary `L x L` table; normalization is checked by consumers.
    pub fn from_table(levels: usize, p: Vec<f64>) -> Result<Self> {
        if levels == 0 || p.len() != levels * levels {
            bail!(Argument, "{} entries for {levels} levels", p.len());
        }
        Ok(Self {
            levels,
            p,
            offsets: Vec::new(),
            symmetric: false,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Counts every in-bounds pair `(grid[y][x], grid[y + dy][x + dx])` over all
/// offsets, adds the transpose when `symmetric`, then divides by the total.
pub fn cooccurrence(
    grid: &LevelGrid,
    offsets: &[(isize, isize)],
    symmetric: bool,
) -> Result<CooccurrenceMatrix> {
    if offsets.is_empty() {
        bail!(Argument, "no co-occurrence offsets given");
    }
    let l = grid.levels;
    let mut counts = vec![0u64; l * l];
    let (h, w) = (grid.height as isize, grid.width as isize);
    for &(dy, dx) in offsets {
        for y in 0..h {
            let y2 = y + dy;
            if y2 < 0 || y2 >= h {
                continue;
            }
            for x in 0..w {
                let x2 = x + dx;
                if x2 < 0 || x2 >= w {
                    continue;
                }
                let a = grid.get(y as usize, x as usize);
                let b = grid.get(y2 as usize, x2 as usize);
                counts[a * l + b] += 1;
            }
        }
    }
    if symmetric {
        let original = counts.clone();
        for i in 0..l {
            for j in 0..l {
                counts[i * l + j] += original[j * l + i];
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        bail!(
            Degenerate,
            "no pixel pair fits a {}x{} grid for offsets {offsets:?}",
            grid.height,
            grid.width
        );
    }
    Ok(CooccurrenceMatrix {
        levels: l,
        p: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        offsets: offsets.to_vec(),
        symmetric,
    })
}
