use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered wavelength sampling shared by cubes and kernels.
///
/// Grids may be irregular; `step` is the median pairwise spacing and is
/// advisory (it scales the discretised unit-mass check, nothing else).
/// Deserialisation runs the same validation as [`SpectralGrid::new`]; the
/// stored step is recomputed, never trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct SpectralGrid {
    wavelengths: Vec<f64>,
    step: f64,
}

#[derive(Deserialize)]
struct RawGrid {
    wavelengths: Vec<f64>,
}

impl TryFrom<RawGrid> for SpectralGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        SpectralGrid::new(raw.wavelengths)
    }
}

impl SpectralGrid {
    /// Builds a grid from band-centre wavelengths in nm.
    ///
    /// Wavelengths must be finite, positive and strictly increasing, with at
    /// least two bands.
    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(Error::parameter(
                "wavelengths",
                format!("need at least 2 bands, got {}", wavelengths.len()),
            ));
        }
        for (i, &w) in wavelengths.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::parameter(
                    "wavelengths",
                    format!("band {i} is {w}, expected finite and positive"),
                ));
            }
            if i > 0 && w <= wavelengths[i - 1] {
                return Err(Error::parameter(
                    "wavelengths",
                    format!(
                        "not strictly increasing at band {i}: {} then {w}",
                        wavelengths[i - 1]
                    ),
                ));
            }
        }
        let mut diffs: Vec<f64> = wavelengths.windows(2).map(|w| w[1] - w[0]).collect();
        diffs.sort_by(|a, b| a.total_cmp(b));
        let step = if diffs.len() % 2 == 1 {
            diffs[diffs.len() / 2]
        } else {
            0.5 * (diffs[diffs.len() / 2 - 1] + diffs[diffs.len() / 2])
        };
        Ok(Self { wavelengths, step })
    }

    /// Uniform grid over `[start, stop]` inclusive with the given step.
    pub fn uniform(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::parameter("step", format!("{step} must be > 0")));
        }
        if !(stop > start) {
            return Err(Error::parameter(
                "stop",
                format!("{stop} must exceed start {start}"),
            ));
        }
        let n = ((stop - start) / step).round() as usize + 1;
        let wavelengths = (0..n).map(|i| start + step * i as f64).collect();
        Self::new(wavelengths)
    }

    /// The default working range: 400–700 nm at 10 nm steps, 31 bands.
    pub fn default_visible() -> Self {
        Self::uniform(400.0, 700.0, 10.0).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least two bands
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn wavelength(&self, band: usize) -> f64 {
        self.wavelengths[band]
    }

    /// Median pairwise spacing in nm.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn min(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn max(&self) -> f64 {
        *self.wavelengths.last().expect("non-empty")
    }
}
