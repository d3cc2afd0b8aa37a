use crate::error::{Error, Result};
use crate::spectral::{gaussian_weights, ChannelMap, HsiCube, OpsinBank};

/// Renders a cube through a bank: per pixel and channel, the dot product of
/// the kernel's weight vector with the pixel spectrum.
///
/// The reduction runs in ascending band order for every pixel, so results are
/// bit-identical however callers choose to distribute pixels.
pub fn render(cube: &HsiCube, bank: &OpsinBank) -> Result<ChannelMap> {
    let n = cube.bands();
    let weights: Vec<Vec<f64>> = bank
        .kernels()
        .iter()
        .map(|k| gaussian_weights(k, cube.grid()))
        .collect::<Result<_>>()?;
    for w in &weights {
        if w.len() != n {
            return Err(Error::dimension(format!(
                "weight vector length {} != cube bands {n}",
                w.len()
            )));
        }
    }

    let c = bank.len();
    let mut values = vec![0.0; cube.height() * cube.width() * c];
    for y in 0..cube.height() {
        for x in 0..cube.width() {
            let spectrum = cube.spectrum(x, y);
            let base = (y * cube.width() + x) * c;
            for (ch, w) in weights.iter().enumerate() {
                let mut acc = 0.0;
                for (wi, si) in w.iter().zip(spectrum) {
                    acc += wi * si;
                }
                values[base + ch] = acc;
            }
        }
    }
    Ok(ChannelMap::from_parts(
        cube.height(),
        cube.width(),
        c,
        values,
        cube.labels().to_vec(),
        cube.num_classes(),
    ))
}
