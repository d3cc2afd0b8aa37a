use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;

/// H×W×N radiance cube with per-pixel class labels.
///
/// Data is stored pixel-major: `data[(y * width + x) * bands + b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    grid: SpectralGrid,
    data: Vec<f64>,
    labels: Vec<u8>,
    num_classes: usize,
}

impl HsiCube {
    /// Validates and assembles a cube. Intensities must be finite and
    /// non-negative; every label must be below `num_classes`.
    pub fn new(
        height: usize,
        width: usize,
        grid: SpectralGrid,
        data: Vec<f64>,
        labels: Vec<u8>,
        num_classes: usize,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::parameter(
                "dims",
                format!("{height}x{width} image has zero area"),
            ));
        }
        if num_classes == 0 || num_classes > 256 {
            return Err(Error::parameter(
                "num_classes",
                format!("{num_classes} outside 1..=256"),
            ));
        }
        let expected = height * width * grid.len();
        if data.len() != expected {
            return Err(Error::dimension(format!(
                "data length {} != H*W*N = {expected}",
                data.len()
            )));
        }
        if labels.len() != height * width {
            return Err(Error::dimension(format!(
                "labels length {} != H*W = {}",
                labels.len(),
                height * width
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parameter(
                    "data",
                    format!("entry {i} is {v}, expected finite and >= 0"),
                ));
            }
        }
        for (i, &l) in labels.iter().enumerate() {
            if usize::from(l) >= num_classes {
                return Err(Error::parameter(
                    "labels",
                    format!("pixel {i} has label {l} >= num_classes {num_classes}"),
                ));
            }
        }
        Ok(Self {
            height,
            width,
            grid,
            data,
            labels,
            num_classes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn value(&self, x: usize, y: usize, band: usize) -> f64 {
        self.data[(y * self.width + x) * self.grid.len() + band]
    }

    /// Full spectrum of one pixel.
    pub fn spectrum(&self, x: usize, y: usize) -> &[f64] {
        let n = self.grid.len();
        let start = (y * self.width + x) * n;
        &self.data[start..start + n]
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Applies `f` to every intensity. The caller guarantees `f` preserves
    /// finiteness and non-negativity, so invariants are not re-checked.
    pub(crate) fn map_data(&self, mut f: impl FnMut(usize, f64) -> f64) -> HsiCube {
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v = f(i, *v);
        }
        out
    }

    /// Replaces the labels, keeping everything else. Used by tests to check
    /// that rendering ignores labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<HsiCube> {
        HsiCube::new(
            self.height,
            self.width,
            self.grid.clone(),
            self.data.clone(),
            labels,
            self.num_classes,
        )
    }
}

/// H×W×C perceived image produced by rendering a cube through an opsin bank.
///
/// Channels are stored pixel-major: `channels[(y * width + x) * c + channel]`.
/// Labels are carried through from the source cube untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
    num_classes: usize,
}

impl ChannelMap {
    /// Assembles a map from raw parts, validating shapes, finiteness and
    /// label range. Rendering produces maps internally; this is for building
    /// fixtures and for feeding externally-computed maps into scoring.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
        labels: Vec<u8>,
        num_classes: usize,
    ) -> Result<Self> {
        if values.len() != height * width * channels {
            return Err(Error::dimension(format!(
                "values length {} != H*W*C = {}",
                values.len(),
                height * width * channels
            )));
        }
        if labels.len() != height * width {
            return Err(Error::dimension(format!(
                "labels length {} != H*W = {}",
                labels.len(),
                height * width
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::parameter(
                "values",
                format!("entry {i} is {v}, expected finite"),
            ));
        }
        if num_classes == 0 || num_classes > 256 {
            return Err(Error::parameter(
                "num_classes",
                format!("{num_classes} outside 1..=256"),
            ));
        }
        for (i, &l) in labels.iter().enumerate() {
            if usize::from(l) >= num_classes {
                return Err(Error::parameter(
                    "labels",
                    format!("pixel {i} has label {l} >= num_classes {num_classes}"),
                ));
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
            labels,
            num_classes,
        })
    }

    pub(crate) fn from_parts(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
        labels: Vec<u8>,
        num_classes: usize,
    ) -> Self {
        debug_assert_eq!(values.len(), height * width * channels);
        debug_assert_eq!(labels.len(), height * width);
        Self {
            height,
            width,
            channels,
            values,
            labels,
            num_classes,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn value(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.values[(y * self.width + x) * self.channels + channel]
    }

    /// Channel vector of one pixel.
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.values[start..start + self.channels]
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub(crate) fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> ChannelMap {
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v = f(i, *v);
        }
        out
    }
}
