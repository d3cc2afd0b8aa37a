//! Simulation and optimisation of Gaussian spectral-sensitivity kernels
//! ("opsins") under segmentation-task pressure.
//!
//! The crate is organised around a small pipeline:
//!
//! 1. [`scene`] builds labelled synthetic hyperspectral cubes, or loads real
//!    ones from the on-disk container.
//! 2. [`environment`] transforms cubes (depth-dependent water attenuation,
//!    dim light, bioluminescence masking) and perturbs rendered channel maps
//!    with intensity-dependent photoreceptor noise.
//! 3. [`spectral`] renders a cube through an opsin bank into a C-channel
//!    perceived image, with an analytic derivative in each kernel's peak
//!    wavelength.
//! 4. [`perception`] scores the perceived image with a small differentiable
//!    per-pixel classifier (cross-entropy loss, exact reverse-mode
//!    gradients, mIoU).
//! 5. [`evolution`] trains the classifier freely while the bank may change
//!    only its peak wavelengths, at most half a nanometre per epoch.
//! 6. [`camouflage`] scores how well foreground pixels can be reconstructed
//!    from the background in channel space.
//!
//! The narrative guide in `book/` walks through the same pipeline; its code
//! blocks compile and run as doc-tests via the [`guide`] module.

pub mod camouflage;
pub mod environment;
mod error;
pub mod evolution;
pub mod guide;
pub mod perception;
pub mod scene;
pub mod spectral;

pub use error::{Error, Result};
