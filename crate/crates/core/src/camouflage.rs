//! Reconstruction-fidelity scoring: how well the foreground hides in the
//! background.
//!
//! The mask is eroded to get a conservative foreground and dilated (then
//! complemented) to get a conservative background, so the score never
//! compares pixels that straddle the boundary. A foreground pixel counts as
//! reconstructable when some background pixel's channel vector sits within a
//! relative distance `t` of its own.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ChannelMap;

/// Foreground mask; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::dimension(format!(
                "mask length {} != {height}x{width}",
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Mask of all pixels carrying the given label.
    pub fn from_labels(map: &ChannelMap, class: u8) -> Self {
        Self {
            height: map.height(),
            width: map.width(),
            values: map.labels().iter().map(|&l| l == class).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn count_true(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// True iff every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(&a, &b)| !a || b)
    }
}

/// Morphology and threshold settings for the score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CamouflageConfig {
    /// Relative reconstruction threshold.
    pub t: f64,
    /// Structuring-element radius in px; 1 means a 3x3 square.
    pub struct_radius: usize,
    /// How many times the morphology is applied.
    pub iterations: usize,
}

impl CamouflageConfig {
    pub fn with_threshold(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::parameter("t", format!("{t} must be > 0")));
        }
        Ok(Self {
            t,
            struct_radius: 1,
            iterations: 1,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::parameter("t", format!("{} must be > 0", self.t)));
        }
        if self.struct_radius == 0 {
            return Err(Error::parameter("struct_radius", "must be >= 1"));
        }
        Ok(())
    }
}

fn morph_pass(mask: &BinaryMask, radius: usize, all: bool) -> BinaryMask {
    let (h, w) = (mask.height as i64, mask.width as i64);
    let r = radius as i64;
    let mut out = vec![false; mask.values.len()];
    for y in 0..h {
        for x in 0..w {
            // edge-clamped (2r+1)^2 window
            let mut acc = all;
            'window: for dy in -r..=r {
                for dx in -r..=r {
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    let v = mask.values[sy * mask.width + sx];
                    if all && !v {
                        acc = false;
                        break 'window;
                    }
                    if !all && v {
                        acc = true;
                        break 'window;
                    }
                }
            }
            out[y as usize * mask.width + x as usize] = acc;
        }
    }
    BinaryMask {
        height: mask.height,
        width: mask.width,
        values: out,
    }
}

/// Erosion: a pixel survives only when its whole window is foreground.
pub fn erode(mask: &BinaryMask, config: &CamouflageConfig) -> BinaryMask {
    let mut out = mask.clone();
    for _ in 0..config.iterations {
        out = morph_pass(&out, config.struct_radius, true);
    }
    out
}

/// Dilation: a pixel turns on when any pixel of its window is foreground.
pub fn dilate(mask: &BinaryMask, config: &CamouflageConfig) -> BinaryMask {
    let mut out = mask.clone();
    for _ in 0..config.iterations {
        out = morph_pass(&out, config.struct_radius, false);
    }
    out
}

/// Fraction of eroded-foreground pixels whose channel vector can be
/// reconstructed from the background: the nearest background vector (first
/// in row-major order on ties) must lie within `t * ||pixel||` in Euclidean
/// channel distance.
pub fn camouflage_score(
    map: &ChannelMap,
    mask: &BinaryMask,
    config: &CamouflageConfig,
) -> Result<f64> {
    config.validate()?;
    if mask.height != map.height() || mask.width != map.width() {
        return Err(Error::dimension(format!(
            "mask {}x{} vs map {}x{}",
            mask.height,
            mask.width,
            map.height(),
            map.width()
        )));
    }
    let foreground = erode(mask, config);
    let dilated = dilate(mask, config);

    let mut background_pixels = Vec::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            if !dilated.get(x, y) {
                background_pixels.push(map.pixel(x, y));
            }
        }
    }
    if foreground.count_true() == 0 {
        return Err(Error::DegenerateRegion { side: "foreground" });
    }
    if background_pixels.is_empty() {
        return Err(Error::DegenerateRegion { side: "background" });
    }

    let mut reconstructed = 0usize;
    let mut total = 0usize;
    for y in 0..map.height() {
        for x in 0..map.width() {
            if !foreground.get(x, y) {
                continue;
            }
            total += 1;
            let pixel = map.pixel(x, y);
            // nearest neighbour in channel space; strict < keeps the first
            // (row-major) pixel on ties
            let mut best = f64::INFINITY;
            for candidate in &background_pixels {
                let mut dist_sq = 0.0;
                for (a, b) in pixel.iter().zip(*candidate) {
                    let d = a - b;
                    dist_sq += d * d;
                }
                if dist_sq < best {
                    best = dist_sq;
                }
            }
            let norm_sq: f64 = pixel.iter().map(|v| v * v).sum();
            if best.sqrt() < config.t * norm_sq.sqrt() {
                reconstructed += 1;
            }
        }
    }
    Ok(reconstructed as f64 / total as f64)
}
