use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SpectralGrid, LAMBDA_MARGIN_NM};

/// One Gaussian spectral-sensitivity kernel: the evolving genotype unit.
///
/// `channel_gain` scales the whole weight vector; 1 models an intact channel,
/// 0 a knockout, intermediate values a weakness. Folding the gain into the
/// weights (rather than the rendered output) keeps knockouts consistent in
/// the gradient path. Deserialisation validates like [`OpsinKernel::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel")]
pub struct OpsinKernel {
    lambda_max: f64,
    sigma: f64,
    trainable: bool,
    channel_gain: f64,
}

#[derive(Deserialize)]
struct RawKernel {
    lambda_max: f64,
    #[serde(default = "default_sigma")]
    sigma: f64,
    #[serde(default = "default_trainable")]
    trainable: bool,
    #[serde(default = "default_gain")]
    channel_gain: f64,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA_NM
}

fn default_trainable() -> bool {
    true
}

fn default_gain() -> f64 {
    1.0
}

impl TryFrom<RawKernel> for OpsinKernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        OpsinKernel::new(raw.lambda_max, raw.sigma, raw.trainable, raw.channel_gain)
    }
}

/// Default Gaussian width. Comparable to real opsin half-bandwidths and wide
/// enough to span several bands at 10 nm spacing.
pub const DEFAULT_SIGMA_NM: f64 = 25.0;

impl OpsinKernel {
    pub fn new(lambda_max: f64, sigma: f64, trainable: bool, channel_gain: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::parameter("sigma", format!("{sigma} must be > 0")));
        }
        if !lambda_max.is_finite() {
            return Err(Error::parameter("lambda_max", format!("{lambda_max}")));
        }
        if !(0.0..=1.0).contains(&channel_gain) {
            return Err(Error::parameter(
                "channel_gain",
                format!("{channel_gain} outside [0, 1]"),
            ));
        }
        Ok(Self {
            lambda_max,
            sigma,
            trainable,
            channel_gain,
        })
    }

    /// Trainable unit-gain kernel with the default width.
    pub fn trainable(lambda_max: f64) -> Result<Self> {
        Self::new(lambda_max, DEFAULT_SIGMA_NM, true, 1.0)
    }

    /// Frozen unit-gain kernel with the default width.
    pub fn frozen(lambda_max: f64) -> Result<Self> {
        Self::new(lambda_max, DEFAULT_SIGMA_NM, false, 1.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn channel_gain(&self) -> f64 {
        self.channel_gain
    }

    pub(crate) fn set_lambda_max(&mut self, lambda_max: f64) {
        self.lambda_max = lambda_max;
    }

    pub(crate) fn set_channel_gain(&mut self, gain: f64) {
        self.channel_gain = gain;
    }

    pub(crate) fn with_lambda_max(mut self, lambda_max: f64) -> Self {
        self.lambda_max = lambda_max;
        self
    }
}

/// Ordered list of kernels; channel identity is positional and stable across
/// an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBank")]
pub struct OpsinBank {
    kernels: Vec<OpsinKernel>,
}

#[derive(Deserialize)]
struct RawBank {
    kernels: Vec<OpsinKernel>,
}

impl TryFrom<RawBank> for OpsinBank {
    type Error = Error;

    fn try_from(raw: RawBank) -> Result<Self> {
        OpsinBank::new(raw.kernels)
    }
}

impl OpsinBank {
    pub fn new(kernels: Vec<OpsinKernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::parameter("kernels", "bank must hold at least one"));
        }
        Ok(Self { kernels })
    }

    /// Trainable unit-gain bank with default widths, one kernel per peak.
    pub fn from_peaks(peaks: &[f64]) -> Result<Self> {
        Self::new(
            peaks
                .iter()
                .map(|&l| OpsinKernel::trainable(l))
                .collect::<Result<_>>()?,
        )
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least one kernel
    }

    pub fn kernels(&self) -> &[OpsinKernel] {
        &self.kernels
    }

    pub fn kernel(&self, index: usize) -> &OpsinKernel {
        &self.kernels[index]
    }

    pub fn lambda_maxes(&self) -> Vec<f64> {
        self.kernels.iter().map(|k| k.lambda_max).collect()
    }

    pub(crate) fn kernel_mut(&mut self, index: usize) -> &mut OpsinKernel {
        &mut self.kernels[index]
    }

    pub(crate) fn insert(&mut self, index: usize, kernel: OpsinKernel) {
        self.kernels.insert(index, kernel);
    }
}

fn check_lambda_in_window(kernel: &OpsinKernel, grid: &SpectralGrid) -> Result<()> {
    let lo = grid.min() - LAMBDA_MARGIN_NM;
    let hi = grid.max() + LAMBDA_MARGIN_NM;
    if kernel.lambda_max < lo || kernel.lambda_max > hi {
        return Err(Error::parameter(
            "lambda_max",
            format!(
                "{} nm outside working window [{lo}, {hi}] nm",
                kernel.lambda_max
            ),
        ));
    }
    Ok(())
}

/// Evaluates the kernel's sensitivity at each band centre:
///
/// `w_i = gain * exp(-(lambda_i - lambda_max)^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)`
pub fn gaussian_weights(kernel: &OpsinKernel, grid: &SpectralGrid) -> Result<Vec<f64>> {
    if !(kernel.sigma > 0.0) {
        return Err(Error::parameter(
            "sigma",
            format!("{} must be > 0", kernel.sigma),
        ));
    }
    check_lambda_in_window(kernel, grid)?;
    let norm = kernel.channel_gain / ((2.0 * std::f64::consts::PI).sqrt() * kernel.sigma);
    let two_sigma_sq = 2.0 * kernel.sigma * kernel.sigma;
    Ok(grid
        .wavelengths()
        .iter()
        .map(|&l| {
            let d = l - kernel.lambda_max;
            norm * (-(d * d) / two_sigma_sq).exp()
        })
        .collect())
}

/// Derivative of each weight with respect to the peak wavelength:
///
/// `g_i = w_i * (lambda_i - lambda_max) / sigma^2`
pub fn weight_gradient(kernel: &OpsinKernel, grid: &SpectralGrid) -> Result<Vec<f64>> {
    let weights = gaussian_weights(kernel, grid)?;
    let inv_sigma_sq = 1.0 / (kernel.sigma * kernel.sigma);
    Ok(grid
        .wavelengths()
        .iter()
        .zip(weights)
        .map(|(&l, w)| w * (l - kernel.lambda_max) * inv_sigma_sq)
        .collect())
}
