//! Canonical settings for each named experiment. Anything a config file
//! leaves out comes from here; the resolved echo spells it all out.

use opsin_evo_core::evolution::{EvolutionConfig, Optimizer};
use opsin_evo_core::scene::{Layout, SpectrumTemplate};
use opsin_evo_core::spectral::OpsinKernel;

use crate::config::{
    DuplicationSpec, EnvSpec, ExperimentName, KdSpec, LightingSpec, PhenotypeSpec, ResolvedConfig,
    SceneSource, ScoringSpec, RESOLVED_FORMAT,
};

fn template(name: &str, peaks: &[(f64, f64, f64)], baseline: f64, jitter: f64) -> SpectrumTemplate {
    SpectrumTemplate::new(name, peaks.to_vec(), baseline, jitter).expect("default template")
}

fn kernel(lambda: f64, trainable: bool) -> OpsinKernel {
    OpsinKernel::new(lambda, opsin_evo_core::spectral::DEFAULT_SIGMA_NM, trainable, 1.0)
        .expect("default kernel")
}

/// 15 nm kernels resolve the 40 nm fruit-peak spacing that the default
/// 25 nm width blurs over.
fn narrow_kernel(lambda: f64, trainable: bool) -> OpsinKernel {
    OpsinKernel::new(lambda, 15.0, trainable, 1.0).expect("default kernel")
}

fn scene(
    scene_count: usize,
    layout: Layout,
    classes: Vec<SpectrumTemplate>,
) -> SceneSource {
    SceneSource::Synth {
        height: 32,
        width: 32,
        scene_count,
        seed: 7,
        grid_start_nm: 400.0,
        grid_stop_nm: 700.0,
        grid_step_nm: 10.0,
        layout,
        classes,
    }
}

fn bright_env() -> EnvSpec {
    EnvSpec {
        depths_m: vec![],
        kd: KdSpec::OceanicDefault,
        dim_factor: None,
        noise_tau: None,
        bioluminescence_label: None,
    }
}

fn evolution(epochs: usize, lr_opsin: f64, seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        epochs,
        lr_opsin,
        lr_head: 5e-3,
        max_shift_nm: 0.5,
        optimizer: Optimizer::adam(),
        cosine_schedule: true,
        seed,
    }
}

/// Martian-surface classes shared by mars-vision and camera-design.
fn mars_classes() -> Vec<SpectrumTemplate> {
    vec![
        template("regolith", &[(610.0, 70.0, 0.5)], 0.24, 0.04),
        template("rock-field", &[(575.0, 55.0, 0.45)], 0.18, 0.04),
        template("sky", &[(475.0, 80.0, 0.35)], 0.14, 0.04),
    ]
}

pub fn defaults_for(name: ExperimentName) -> ResolvedConfig {
    let (scene, env, bank, duplication, evolution, scoring) = match name {
        // Dim-light run from the red/UV cone pair toward the mid-spectrum
        // window where the scene classes actually differ.
        ExperimentName::MammalDichromacy => (
            scene(
                4,
                Layout::Blobs { blob_count: 6 },
                vec![
                    template("ground", &[(490.0, 60.0, 0.45)], 0.25, 0.05),
                    template("foliage", &[(550.0, 45.0, 0.6)], 0.2, 0.05),
                    template("sky", &[(465.0, 70.0, 0.5)], 0.3, 0.05),
                ],
            ),
            EnvSpec {
                dim_factor: Some(0.1),
                noise_tau: Some(0.1),
                ..bright_env()
            },
            vec![kernel(620.0, true), kernel(375.0, true)],
            None,
            EvolutionConfig {
                lr_head: 0.1,
                cosine_schedule: false,
                ..evolution(300, 0.2, 42)
            },
            None,
        ),
        // A 560 nm kernel duplicates between two narrow fruit peaks at 540
        // and 580 nm while the blue kernel stays frozen. Heavy frozen jitter
        // keeps the loss floor positive and a mixed-fruit class makes the
        // symmetric twin position level-ambiguous, so splitting pays off.
        // Whether (and when) the pair escapes the symmetric ridge depends on
        // the seed, echoing the mixed fates of real duplications; the
        // default seed separates by ~20 nm within 200 epochs.
        ExperimentName::GeneDuplication => (
            scene(
                4,
                Layout::Blobs { blob_count: 12 },
                vec![
                    template("canopy", &[], 0.2, 0.3),
                    template("fruit-540", &[(540.0, 15.0, 1.0)], 0.1, 0.3),
                    template("fruit-580", &[(580.0, 15.0, 1.0)], 0.1, 0.3),
                    template(
                        "fruit-mixed",
                        &[(540.0, 15.0, 0.5), (580.0, 15.0, 0.5)],
                        0.1,
                        0.3,
                    ),
                ],
            ),
            bright_env(),
            vec![narrow_kernel(560.0, true), narrow_kernel(425.0, false)],
            Some(DuplicationSpec {
                index: 0,
                jitter_nm: 0.5,
            }),
            EvolutionConfig {
                lr_head: 0.2,
                cosine_schedule: false,
                ..evolution(200, 0.45, 18)
            },
            None,
        ),
        // Fixed trichromat bank scored for fruit camouflage under three
        // lightings and five phenotypes; no training. The fruit peak sits
        // close enough to the leaf peak that phenotypes genuinely disagree
        // about how well it hides.
        ExperimentName::ColorblindFruit => (
            scene(
                2,
                Layout::ScatteredFruit {
                    fruit_density: 0.22,
                },
                vec![
                    template("leaf", &[(560.0, 45.0, 0.5)], 0.15, 0.15),
                    template("fruit", &[(620.0, 35.0, 0.55)], 0.15, 0.15),
                ],
            ),
            EnvSpec {
                noise_tau: Some(0.1),
                ..bright_env()
            },
            vec![kernel(580.0, false), kernel(540.0, false), kernel(425.0, false)],
            None,
            evolution(0, 2e-2, 42),
            Some(ScoringSpec {
                mask_class: 1,
                lightings: vec![
                    LightingSpec {
                        label: "bright".into(),
                        dim_factor: None,
                        noise_tau: None,
                        t: 0.2,
                    },
                    LightingSpec {
                        label: "dark-0.1".into(),
                        dim_factor: Some(0.1),
                        noise_tau: Some(0.1),
                        t: 1.2,
                    },
                    LightingSpec {
                        label: "dark-0.05".into(),
                        dim_factor: Some(0.05),
                        noise_tau: Some(0.1),
                        t: 1.6,
                    },
                ],
                phenotypes: vec![
                    PhenotypeSpec::Intact {
                        label: "normal".into(),
                    },
                    PhenotypeSpec::Knockout {
                        label: "green-blind".into(),
                        kernel: 1,
                    },
                    PhenotypeSpec::Knockout {
                        label: "red-blind".into(),
                        kernel: 0,
                    },
                    PhenotypeSpec::Weakness {
                        label: "green-weak".into(),
                        kernel: 1,
                        gain: 0.3,
                    },
                    PhenotypeSpec::Weakness {
                        label: "red-weak".into(),
                        kernel: 0,
                        gain: 0.3,
                    },
                ],
            }),
        ),
        // Khaki shades: rocks and dirt nearly metameric, trained twice with
        // an intact and a red-knockout bank to compare final mIoU.
        ExperimentName::Khaki => (
            scene(
                4,
                Layout::Blobs { blob_count: 6 },
                vec![
                    template("dirt", &[(585.0, 80.0, 0.5)], 0.22, 0.04),
                    template("rock", &[(600.0, 75.0, 0.52)], 0.2, 0.04),
                    template("shadow", &[(590.0, 90.0, 0.3)], 0.12, 0.04),
                ],
            ),
            bright_env(),
            vec![kernel(580.0, true), kernel(540.0, true), kernel(425.0, true)],
            None,
            EvolutionConfig {
                lr_head: 0.1,
                cosine_schedule: false,
                ..evolution(200, 5e-2, 42)
            },
            None,
        ),
        // One rod kernel from the ancestral 493 nm peak, one run per depth.
        ExperimentName::Blueshift => (
            scene(
                4,
                Layout::Blobs { blob_count: 6 },
                vec![
                    // flat water column against one red-lobed prey class:
                    // the class difference peaks at 540 nm at the surface
                    // and the attenuation window drags it blueward at depth
                    template("water-column", &[], 0.2, 0.05),
                    template("drifting-prey", &[(540.0, 60.0, 0.5)], 0.2, 0.05),
                ],
            ),
            EnvSpec {
                depths_m: vec![0.0, 10.0, 50.0, 70.0],
                noise_tau: Some(0.02),
                ..bright_env()
            },
            vec![kernel(493.0, true)],
            None,
            EvolutionConfig {
                lr_head: 0.1,
                cosine_schedule: false,
                ..evolution(300, 0.3, 42)
            },
            None,
        ),
        // Five identical rod kernels at depth. Without bioluminescence the
        // channel noise keeps the quintet huddled around the attenuation
        // window; with the lure class exempt from attenuation, its lit 530 nm
        // peak collides with a blue decoy at every blue kernel position, so
        // at least one kernel walks redward and the spread opens up.
        ExperimentName::Multirod => (
            scene(
                4,
                Layout::Blobs { blob_count: 12 },
                vec![
                    template("water", &[], 0.12, 0.3),
                    template("drifter", &[(500.0, 25.0, 0.6)], 0.08, 0.3),
                    template("lure", &[(530.0, 14.0, 1.2)], 0.04, 0.3),
                    template("blue-decoy", &[(495.0, 20.0, 0.3)], 0.08, 0.3),
                ],
            ),
            EnvSpec {
                depths_m: vec![50.0],
                noise_tau: Some(0.02),
                bioluminescence_label: Some(2),
                ..bright_env()
            },
            vec![
                narrow_kernel(481.0, true),
                narrow_kernel(481.0, true),
                narrow_kernel(481.0, true),
                narrow_kernel(481.0, true),
                narrow_kernel(481.0, true),
            ],
            None,
            EvolutionConfig {
                lr_head: 0.1,
                cosine_schedule: false,
                ..evolution(200, 0.2, 2)
            },
            None,
        ),
        ExperimentName::MarsVision => (
            scene(4, Layout::Blobs { blob_count: 6 }, mars_classes()),
            bright_env(),
            vec![kernel(560.0, true), kernel(425.0, true)],
            None,
            EvolutionConfig {
                lr_head: 0.1,
                cosine_schedule: false,
                ..evolution(300, 0.3, 42)
            },
            None,
        ),
        // Human-like general filters refined for the Martian scene; the
        // "general" condition is the untrained baseline.
        ExperimentName::CameraDesign => (
            scene(4, Layout::Blobs { blob_count: 6 }, mars_classes()),
            bright_env(),
            vec![kernel(580.0, true), kernel(540.0, true), kernel(425.0, true)],
            None,
            EvolutionConfig {
                lr_head: 0.1,
                cosine_schedule: false,
                ..evolution(300, 0.3, 42)
            },
            None,
        ),
    };
    ResolvedConfig {
        format: RESOLVED_FORMAT.into(),
        name,
        scene,
        env,
        bank,
        duplication,
        evolution,
        scoring,
        out_dir: None,
    }
}
