//! The named experiment protocols: how a resolved config turns into one or
//! more evolution (or scoring) conditions, and how those conditions run.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use opsin_evo_core::camouflage::{camouflage_score, BinaryMask, CamouflageConfig};
use opsin_evo_core::environment::{add_noise, derive_stream_seed, dim, NoiseModel};
use opsin_evo_core::evolution::{
    apply_modifier, duplicate_kernel, run_evolution, ChannelModifier, EnvPipeline,
    EvolutionConfig, ModifierMode, TrajectoryRecord,
};
use opsin_evo_core::scene::{load_scene, synth_scene, SceneConfig};
use opsin_evo_core::spectral::{render, HsiCube, OpsinBank, SpectralGrid};

use crate::config::{ExperimentName, PhenotypeSpec, ResolvedConfig, SceneSource};

/// One independent unit of work inside an experiment.
#[derive(Debug, Clone)]
pub struct ConditionPlan {
    pub label: String,
    pub bank: OpsinBank,
    pub pipeline: EnvPipeline,
    pub evolution: EvolutionConfig,
}

/// What a condition produced.
#[derive(Debug, Clone)]
pub struct ConditionResult {
    pub label: String,
    /// Present for evolution conditions, absent for pure scoring ones.
    pub records: Vec<TrajectoryRecord>,
    pub final_bank: OpsinBank,
    pub final_miou: Option<f64>,
    pub final_loss: Option<f64>,
    pub s_r: Option<f64>,
}

/// Everything an experiment run computed, before any files are written.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ResolvedConfig,
    pub conditions: Vec<ConditionResult>,
}

/// Builds the scene set for a config: synthesised cubes (scene `i` seeded
/// with `seed + i`) or container files.
pub fn build_scenes(source: &SceneSource) -> Result<Vec<HsiCube>> {
    match source {
        SceneSource::Synth {
            height,
            width,
            scene_count,
            seed,
            grid_start_nm,
            grid_stop_nm,
            grid_step_nm,
            layout,
            classes,
        } => {
            if *scene_count == 0 {
                bail!("scene_count must be >= 1");
            }
            let grid = SpectralGrid::uniform(*grid_start_nm, *grid_stop_nm, *grid_step_nm)
                .context("invalid scene grid")?;
            (0..*scene_count)
                .map(|i| {
                    synth_scene(&SceneConfig {
                        height: *height,
                        width: *width,
                        grid: grid.clone(),
                        classes: classes.clone(),
                        layout: layout.clone(),
                        seed: seed + i as u64,
                    })
                    .with_context(|| format!("synthesising scene {i}"))
                })
                .collect()
        }
        SceneSource::Files { paths } => {
            if paths.is_empty() {
                bail!("scene.input_paths must not be empty");
            }
            paths
                .iter()
                .map(|p| load_scene(p).with_context(|| format!("loading {}", p.display())))
                .collect()
        }
    }
}

fn base_pipeline(config: &ResolvedConfig, depth: Option<f64>) -> Result<EnvPipeline> {
    let mut pipeline = EnvPipeline::none();
    if let Some(d) = depth {
        pipeline = pipeline.with_attenuation(d, config.env.kd.model()?);
    }
    if let Some(f) = config.env.dim_factor {
        pipeline = pipeline.with_dim(f);
    }
    if let Some(tau) = config.env.noise_tau {
        pipeline = pipeline.with_noise(tau);
    }
    Ok(pipeline)
}

/// Expands a config into its conditions. Scoring experiments are handled
/// separately in [`run_experiment`].
pub fn plan_conditions(config: &ResolvedConfig) -> Result<Vec<ConditionPlan>> {
    let mut bank = config.bank()?;
    if let Some(dup) = &config.duplication {
        // The duplication draw shares the run seed, so the whole protocol is
        // pinned by one number.
        bank = duplicate_kernel(&bank, dup.index, dup.jitter_nm, config.evolution.seed)?;
    }
    let single_depth = config.env.depths_m.first().copied();

    let plans = match config.name {
        ExperimentName::Blueshift => config
            .env
            .depths_m
            .iter()
            .map(|&depth| {
                Ok(ConditionPlan {
                    label: format!("depth-{depth}m"),
                    bank: bank.clone(),
                    pipeline: base_pipeline(config, Some(depth))?,
                    evolution: config.evolution.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        ExperimentName::Multirod => {
            let bio_label = config.env.bioluminescence_label.ok_or_else(|| {
                anyhow::anyhow!("multirod needs env.bioluminescence_label")
            })?;
            if single_depth.is_none() {
                bail!("multirod needs env.depths_m");
            }
            let plain = base_pipeline(config, single_depth)?;
            let with_bio = plain.clone().with_bioluminescence(bio_label);
            vec![
                ConditionPlan {
                    label: "without-bioluminescence".into(),
                    bank: bank.clone(),
                    pipeline: plain,
                    evolution: config.evolution.clone(),
                },
                ConditionPlan {
                    label: "with-bioluminescence".into(),
                    bank,
                    pipeline: with_bio,
                    evolution: config.evolution.clone(),
                },
            ]
        }
        ExperimentName::Khaki => {
            let pipeline = base_pipeline(config, single_depth)?;
            let blind = apply_modifier(
                &bank,
                ChannelModifier {
                    kernel: 0,
                    mode: ModifierMode::Knockout,
                },
            )?;
            vec![
                ConditionPlan {
                    label: "normal-vision".into(),
                    bank,
                    pipeline: pipeline.clone(),
                    evolution: config.evolution.clone(),
                },
                ConditionPlan {
                    label: "colour-blind".into(),
                    bank: blind,
                    pipeline,
                    evolution: config.evolution.clone(),
                },
            ]
        }
        ExperimentName::CameraDesign => {
            let pipeline = base_pipeline(config, single_depth)?;
            let baseline = EvolutionConfig {
                epochs: 0,
                ..config.evolution.clone()
            };
            vec![
                ConditionPlan {
                    label: "general".into(),
                    bank: bank.clone(),
                    pipeline: pipeline.clone(),
                    evolution: baseline,
                },
                ConditionPlan {
                    label: "designed".into(),
                    bank,
                    pipeline,
                    evolution: config.evolution.clone(),
                },
            ]
        }
        ExperimentName::MammalDichromacy
        | ExperimentName::GeneDuplication
        | ExperimentName::MarsVision => vec![ConditionPlan {
            label: "main".into(),
            bank,
            pipeline: base_pipeline(config, single_depth)?,
            evolution: config.evolution.clone(),
        }],
        ExperimentName::ColorblindFruit => {
            bail!("colorblind-fruit is a scoring protocol, not an evolution one")
        }
    };
    Ok(plans)
}

fn run_condition(plan: &ConditionPlan, scenes: &[HsiCube]) -> Result<ConditionResult> {
    let outcome = run_evolution(plan.bank.clone(), scenes, &plan.pipeline, &plan.evolution)
        .with_context(|| format!("condition `{}`", plan.label))?;
    let last = outcome.records.last().expect("at least epoch 0");
    Ok(ConditionResult {
        label: plan.label.clone(),
        final_miou: Some(last.miou),
        final_loss: Some(last.loss),
        records: outcome.records,
        final_bank: outcome.bank,
        s_r: None,
    })
}

/// Mean camouflage score of a phenotype bank over the scene set under one
/// lighting. Noise streams are keyed on (seed, scene, combo) so every cell
/// of the score table is independently reproducible.
#[allow(clippy::too_many_arguments)]
fn score_combo(
    scenes: &[HsiCube],
    bank: &OpsinBank,
    mask_class: u8,
    dim_factor: Option<f64>,
    noise_tau: Option<f64>,
    t: f64,
    seed: u64,
    combo_index: u64,
) -> Result<f64> {
    let camo = CamouflageConfig {
        t,
        struct_radius: 1,
        iterations: 1,
    };
    let mut total = 0.0;
    for (scene_idx, cube) in scenes.iter().enumerate() {
        let lit = match dim_factor {
            Some(f) => dim(cube, f)?,
            None => cube.clone(),
        };
        let mut map = render(&lit, bank)?;
        if let Some(tau) = noise_tau {
            let stream = derive_stream_seed(seed, scene_idx as u64, combo_index);
            map = add_noise(&map, &NoiseModel::new(tau, stream)?)?;
        }
        let mask = BinaryMask::from_labels(&map, mask_class);
        total += camouflage_score(&map, &mask, &camo)?;
    }
    Ok(total / scenes.len() as f64)
}

fn run_scoring_experiment(config: &ResolvedConfig, scenes: &[HsiCube]) -> Result<Vec<ConditionResult>> {
    let scoring = config
        .scoring
        .as_ref()
        .expect("validated: scoring present for colorblind-fruit");
    let bank = config.bank()?;
    let mut conditions = Vec::new();

    // One epoch-0 trajectory of the intact bank in bright light anchors the
    // run outputs (wavelengths, initial loss and mIoU).
    let anchor = run_evolution(
        bank.clone(),
        scenes,
        &EnvPipeline::none(),
        &EvolutionConfig {
            epochs: 0,
            ..config.evolution.clone()
        },
    )?;
    let anchor_last = anchor.records.last().expect("epoch 0");
    conditions.push(ConditionResult {
        label: "main".into(),
        final_miou: Some(anchor_last.miou),
        final_loss: Some(anchor_last.loss),
        records: anchor.records,
        final_bank: anchor.bank,
        s_r: None,
    });

    let mut combo_index = 0u64;
    for phenotype in &scoring.phenotypes {
        let phenotype_bank = match phenotype {
            PhenotypeSpec::Intact { .. } => bank.clone(),
            PhenotypeSpec::Knockout { kernel, .. } => apply_modifier(
                &bank,
                ChannelModifier {
                    kernel: *kernel,
                    mode: ModifierMode::Knockout,
                },
            )?,
            PhenotypeSpec::Weakness { kernel, gain, .. } => apply_modifier(
                &bank,
                ChannelModifier {
                    kernel: *kernel,
                    mode: ModifierMode::Weakness { gain: *gain },
                },
            )?,
        };
        for lighting in &scoring.lightings {
            let s_r = score_combo(
                scenes,
                &phenotype_bank,
                scoring.mask_class,
                lighting.dim_factor,
                lighting.noise_tau,
                lighting.t,
                config.evolution.seed,
                combo_index,
            )
            .with_context(|| {
                format!("scoring {} under {}", phenotype.label(), lighting.label)
            })?;
            conditions.push(ConditionResult {
                label: format!("{}/{}", phenotype.label(), lighting.label),
                records: Vec::new(),
                final_bank: phenotype_bank.clone(),
                final_miou: None,
                final_loss: None,
                s_r: Some(s_r),
            });
            combo_index += 1;
        }
    }
    Ok(conditions)
}

/// Runs the whole named protocol. `threads > 1` evaluates independent
/// conditions in parallel; results are identical to the serial order.
pub fn run_experiment(config: &ResolvedConfig, threads: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    let scenes = build_scenes(&config.scene)?;
    let conditions = if config.name == ExperimentName::ColorblindFruit {
        run_scoring_experiment(config, &scenes)?
    } else {
        let plans = plan_conditions(config)?;
        if threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .context("building thread pool")?;
            pool.install(|| {
                plans
                    .par_iter()
                    .map(|p| run_condition(p, &scenes))
                    .collect::<Result<Vec<_>>>()
            })?
        } else {
            plans
                .iter()
                .map(|p| run_condition(p, &scenes))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        conditions,
    })
}

/// Per-condition lines of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub label: String,
    pub final_lambda_max_nm: Vec<f64>,
    pub final_miou: Option<f64>,
    pub final_loss: Option<f64>,
    pub s_r: Option<f64>,
    /// Update epochs recorded (trajectory rows are `epochs + 1` per kernel).
    pub epochs: usize,
    pub trajectory_file: Option<String>,
}

/// Machine-readable run result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub config_hash: String,
    pub wall_clock_seconds: f64,
    /// Bank of the last condition (the "result" phenotype by convention).
    pub final_bank: Vec<opsin_evo_core::spectral::OpsinKernel>,
    pub final_miou: Option<f64>,
    pub conditions: Vec<ConditionSummary>,
}
