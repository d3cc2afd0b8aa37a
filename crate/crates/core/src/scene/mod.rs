//! Labelled synthetic hyperspectral scenes and the on-disk cube container.
//!
//! Scenes stand in for field datasets: fruit scattered in leaves, khaki
//! rocks against dirt, stripes of open water and targets. Each class is a
//! [`SpectrumTemplate`]; a seeded layout paints class labels and every pixel
//! receives its template's spectrum plus optional multiplicative jitter.

mod container;
mod synth;

pub use container::{load_scene, save_scene, MAGIC};
pub use synth::{synth_scene, Layout, SceneConfig, SpectrumTemplate};
