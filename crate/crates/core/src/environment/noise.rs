use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ChannelMap;

/// Intensity-dependent photoreceptor noise: each perceived value `I` gains a
/// zero-mean Gaussian with variance `tau * I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub tau: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(tau: f64, seed: u64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::parameter("tau", format!("{tau} must be >= 0")));
        }
        Ok(Self { tau, seed })
    }
}

/// splitmix64 finaliser; decorrelates consecutive cell coordinates.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and two coordinates,
/// e.g. (scene index, epoch). Used to redraw noise per epoch and scene
/// without correlating the streams.
pub fn derive_stream_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut s = mix64(base ^ 0x51_7c_c1_b7_27_22_0a_95);
    s = mix64(s ^ a.wrapping_add(0x9e37_79b9_7f4a_7c15));
    mix64(s ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

fn cell_seed(seed: u64, x: usize, y: usize, c: usize) -> u64 {
    let mut s = mix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for v in [x as u64, y as u64, c as u64] {
        s = mix64(s ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15));
    }
    s
}

/// One standard-normal draw for a cell, keyed only on (seed, x, y, c).
///
/// Because the draw never depends on neighbouring cells, any evaluation
/// order — including parallel — produces bit-identical output.
fn standard_normal_at(seed: u64, x: usize, y: usize, c: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, x, y, c));
    StandardNormal.sample(&mut rng)
}

/// Adds `Gaussian(0, tau * I)` to every channel value `I`, clamping negative
/// results to zero. Deterministic in the model seed.
pub fn add_noise(map: &ChannelMap, model: &NoiseModel) -> Result<ChannelMap> {
    if !(model.tau >= 0.0) || !model.tau.is_finite() {
        return Err(Error::parameter(
            "tau",
            format!("{} must be >= 0", model.tau),
        ));
    }
    if let Some(bad) = map.values().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::parameter(
            "map",
            format!("intensity {bad} must be finite and >= 0 for variance tau*I"),
        ));
    }
    let (w, c) = (map.width(), map.channels());
    Ok(map.map_values(|i, v| {
        let pixel = i / c;
        let (x, y) = (pixel % w, pixel / w);
        let g = standard_normal_at(model.seed, x, y, i % c);
        (v + g * (model.tau * v).sqrt()).max(0.0)
    }))
}
