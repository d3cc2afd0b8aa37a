//! Environmental transforms: depth-dependent water attenuation, dim-light
//! scaling, bioluminescence masking and photoreceptor noise.

mod attenuation;
mod noise;

pub use attenuation::AttenuationModel;
pub use noise::{add_noise, derive_stream_seed, NoiseModel};

use crate::error::{Error, Result};
use crate::spectral::HsiCube;

/// Class whose pixels emit their own light and therefore bypass attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BioluminescenceSpec {
    pub bio_label: u8,
}

/// Scales every band of every pixel by `exp(-K_d(lambda) * depth)`.
///
/// Multiplicative and monotone non-increasing in depth per band; labels are
/// untouched.
pub fn attenuate(cube: &HsiCube, depth_m: f64, model: &AttenuationModel) -> Result<HsiCube> {
    if !(depth_m >= 0.0) || !depth_m.is_finite() {
        return Err(Error::parameter(
            "depth_m",
            format!("{depth_m} must be finite and >= 0"),
        ));
    }
    let factors: Vec<f64> = cube
        .grid()
        .wavelengths()
        .iter()
        .map(|&l| model.kd_at(l).map(|kd| (-kd * depth_m).exp()))
        .collect::<Result<_>>()?;
    let n = cube.bands();
    Ok(cube.map_data(|i, v| v * factors[i % n]))
}

/// Uniform intensity scaling with a factor in (0, 1].
pub fn dim(cube: &HsiCube, factor: f64) -> Result<HsiCube> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::parameter(
            "factor",
            format!("{factor} outside (0, 1]"),
        ));
    }
    Ok(cube.map_data(|_, v| v * factor))
}

/// Splices self-luminous pixels back into an attenuated cube: pixels whose
/// label matches `spec.bio_label` keep their original values, all others take
/// the attenuated ones.
pub fn bioluminesce(
    original: &HsiCube,
    attenuated: &HsiCube,
    spec: BioluminescenceSpec,
) -> Result<HsiCube> {
    if original.height() != attenuated.height()
        || original.width() != attenuated.width()
        || original.bands() != attenuated.bands()
    {
        return Err(Error::dimension(format!(
            "original {}x{}x{} vs attenuated {}x{}x{}",
            original.height(),
            original.width(),
            original.bands(),
            attenuated.height(),
            attenuated.width(),
            attenuated.bands()
        )));
    }
    if original.grid() != attenuated.grid() {
        return Err(Error::dimension("grids differ"));
    }
    if original.labels() != attenuated.labels() {
        return Err(Error::dimension("labels differ"));
    }
    if usize::from(spec.bio_label) >= original.num_classes() {
        return Err(Error::parameter(
            "bio_label",
            format!(
                "{} >= num_classes {}",
                spec.bio_label,
                original.num_classes()
            ),
        ));
    }
    let n = original.bands();
    let labels = original.labels();
    let original_data = original.data();
    Ok(attenuated.map_data(|i, v| {
        if labels[i / n] == spec.bio_label {
            original_data[i]
        } else {
            v
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{synth_scene, Layout, SceneConfig, SpectrumTemplate};
    use crate::spectral::SpectralGrid;
    use approx::assert_relative_eq;

    fn stripe_cube() -> HsiCube {
        synth_scene(&SceneConfig {
            height: 8,
            width: 8,
            grid: SpectralGrid::default_visible(),
            classes: vec![
                SpectrumTemplate::new("water", vec![(480.0, 50.0, 0.6)], 0.2, 0.0).unwrap(),
                SpectrumTemplate::new("target", vec![(560.0, 40.0, 0.8)], 0.2, 0.0).unwrap(),
            ],
            layout: Layout::Stripes,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn zero_depth_is_the_identity() {
        let cube = stripe_cube();
        let out = attenuate(&cube, 0.0, &AttenuationModel::oceanic_default()).unwrap();
        assert_eq!(cube, out);
    }

    #[test]
    fn zero_kd_is_the_identity_at_any_depth() {
        let cube = stripe_cube();
        let flat = AttenuationModel::from_table(vec![(300.0, 0.0), (800.0, 0.0)]).unwrap();
        let out = attenuate(&cube, 123.0, &flat).unwrap();
        assert_eq!(cube.data(), out.data());
    }

    #[test]
    fn scalar_factor_matches_exponential() {
        let grid = SpectralGrid::new(vec![500.0, 510.0]).unwrap();
        let cube = HsiCube::new(1, 1, grid, vec![1.0, 2.0], vec![0], 1).unwrap();
        let model = AttenuationModel::from_table(vec![(400.0, 0.1), (600.0, 0.1)]).unwrap();
        let out = attenuate(&cube, 10.0, &model).unwrap();
        // e^{-0.1 * 10} = e^{-1}
        assert_relative_eq!(out.value(0, 0, 0), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(out.value(0, 0, 0), 0.367_879, max_relative = 1e-5);
        assert_relative_eq!(out.value(0, 0, 1), 2.0 * (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn attenuation_composes_as_a_semigroup() {
        let cube = stripe_cube();
        let model = AttenuationModel::oceanic_default();
        let once = attenuate(&cube, 30.0, &model).unwrap();
        let twice = attenuate(&attenuate(&cube, 12.0, &model).unwrap(), 18.0, &model).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn per_band_totals_shrink_with_depth() {
        let cube = stripe_cube();
        let model = AttenuationModel::oceanic_default();
        let shallow = attenuate(&cube, 5.0, &model).unwrap();
        let deep = attenuate(&cube, 40.0, &model).unwrap();
        for b in 0..cube.bands() {
            let total = |c: &HsiCube| -> f64 {
                (0..8)
                    .flat_map(|y| (0..8).map(move |x| (x, y)))
                    .map(|(x, y)| c.value(x, y, b))
                    .sum()
            };
            assert!(total(&deep) < total(&shallow));
        }
    }

    #[test]
    fn negative_depth_is_rejected() {
        let cube = stripe_cube();
        let model = AttenuationModel::oceanic_default();
        assert!(attenuate(&cube, -1.0, &model).is_err());
    }

    #[test]
    fn dim_identity_and_composition() {
        let cube = stripe_cube();
        assert_eq!(dim(&cube, 1.0).unwrap(), cube);
        let twice = dim(&dim(&cube, 0.1).unwrap(), 0.1).unwrap();
        let once = dim(&cube, 0.01).unwrap();
        for (a, b) in twice.data().iter().zip(once.data()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        // 0.05 * 2.0 is exact in binary: both are scaled by powers of two
        // from the same decimal mantissa.
        let grid = SpectralGrid::new(vec![500.0, 510.0]).unwrap();
        let c = HsiCube::new(1, 1, grid, vec![2.0, 2.0], vec![0], 1).unwrap();
        assert_eq!(dim(&c, 0.05).unwrap().value(0, 0, 0), 0.1);
    }

    #[test]
    fn dim_rejects_out_of_range_factors() {
        let cube = stripe_cube();
        assert!(dim(&cube, 0.0).is_err());
        assert!(dim(&cube, -0.5).is_err());
        assert!(dim(&cube, 1.5).is_err());
    }

    #[test]
    fn bioluminescence_selects_per_pixel() {
        let cube = stripe_cube();
        let model = AttenuationModel::oceanic_default();
        let attenuated = attenuate(&cube, 50.0, &model).unwrap();
        let spec = BioluminescenceSpec { bio_label: 1 };
        let out = bioluminesce(&cube, &attenuated, spec).unwrap();
        // two-branch loop oracle
        for y in 0..8 {
            for x in 0..8 {
                for b in 0..cube.bands() {
                    let expected = if cube.label(x, y) == 1 {
                        cube.value(x, y, b)
                    } else {
                        attenuated.value(x, y, b)
                    };
                    assert_eq!(out.value(x, y, b), expected);
                }
            }
        }
    }

    #[test]
    fn bioluminescence_degenerate_labels() {
        let cube = stripe_cube();
        let attenuated = attenuate(&cube, 50.0, &AttenuationModel::oceanic_default()).unwrap();
        // no pixel carries a non-existent label -> would be a parameter error
        assert!(bioluminesce(&cube, &attenuated, BioluminescenceSpec { bio_label: 9 }).is_err());
        // every pixel bio: relabel everything to one class
        let all_one = cube.with_labels(vec![0; 64]).unwrap();
        let att_one = attenuate(&all_one, 50.0, &AttenuationModel::oceanic_default()).unwrap();
        let out = bioluminesce(&all_one, &att_one, BioluminescenceSpec { bio_label: 0 }).unwrap();
        assert_eq!(out.data(), all_one.data());
    }

    #[test]
    fn bioluminescence_rejects_mismatched_inputs() {
        let cube = stripe_cube();
        let attenuated = attenuate(&cube, 50.0, &AttenuationModel::oceanic_default()).unwrap();
        let relabeled = attenuated.with_labels(vec![0; 64]).unwrap();
        assert!(
            bioluminesce(&cube, &relabeled, BioluminescenceSpec { bio_label: 1 }).is_err()
        );
    }

    #[test]
    fn output_is_pixelwise_one_of_the_inputs() {
        let cube = stripe_cube();
        let attenuated = attenuate(&cube, 20.0, &AttenuationModel::oceanic_default()).unwrap();
        let out =
            bioluminesce(&cube, &attenuated, BioluminescenceSpec { bio_label: 0 }).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let s = out.spectrum(x, y);
                assert!(s == cube.spectrum(x, y) || s == attenuated.spectrum(x, y));
            }
        }
    }
}
