//! Wavelength grids, hyperspectral cubes, Gaussian opsin banks and the
//! rendering integral that maps a cube to a C-channel perceived image.

mod cube;
mod grid;
mod opsin;
mod render;

pub use cube::{ChannelMap, HsiCube};
pub use grid::SpectralGrid;
pub use opsin::{gaussian_weights, weight_gradient, OpsinBank, OpsinKernel, DEFAULT_SIGMA_NM};
pub use render::render;

/// How far a peak wavelength may sit outside the grid span before weight
/// evaluation refuses it (nm).
pub const LAMBDA_MARGIN_NM: f64 = 100.0;
