//! The evolutionary conservation optimiser.
//!
//! The perception head trains freely; the opsin bank may change only its
//! peak wavelengths, each by at most `max_shift_nm` per epoch (a hard clamp
//! on the applied shift). Widths, gains and frozen kernels never move.
//! Gene duplication and channel knockout/weakness are the other two
//! mutation protocols.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{
    add_noise, attenuate, bioluminesce, derive_stream_seed, dim, AttenuationModel,
    BioluminescenceSpec, NoiseModel,
};
use crate::error::{Error, Result};
use crate::perception::{
    featurize, forward, init_head, loss_and_grads, miou, HeadGradients, PerceptionHead,
    DEFAULT_HIDDEN,
};
use crate::spectral::{render, weight_gradient, ChannelMap, HsiCube, OpsinBank, LAMBDA_MARGIN_NM};

/// Gradient-step rule shared by the head and the peak wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

/// Settings for one evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Number of update epochs; 0 means evaluate the initial state only.
    pub epochs: usize,
    /// Base learning rate for peak wavelengths, nm-scale.
    pub lr_opsin: f64,
    /// Base learning rate for the head.
    pub lr_head: f64,
    /// Hard cap on the per-epoch wavelength shift, nm.
    pub max_shift_nm: f64,
    pub optimizer: Optimizer,
    /// Cosine-decay both learning rates over the run.
    pub cosine_schedule: bool,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr_opsin: 2e-2,
            lr_head: 5e-4,
            max_shift_nm: 0.5,
            optimizer: Optimizer::adam(),
            cosine_schedule: true,
            seed: 42,
        }
    }
}

impl EvolutionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.max_shift_nm > 0.0) {
            return Err(Error::parameter(
                "max_shift_nm",
                format!("{} must be > 0", self.max_shift_nm),
            ));
        }
        if !(self.lr_opsin >= 0.0) || !(self.lr_head >= 0.0) {
            return Err(Error::parameter("learning rates", "must be >= 0"));
        }
        Ok(())
    }

    /// Learning-rate multiplier for a 1-based update epoch.
    fn schedule(&self, epoch: usize) -> f64 {
        if self.cosine_schedule && self.epochs > 0 {
            0.5 * (1.0 + (std::f64::consts::PI * (epoch - 1) as f64 / self.epochs as f64).cos())
        } else {
            1.0
        }
    }
}

/// Per-epoch snapshot: wavelengths after the update, metrics from the
/// forward pass that produced the update, and the shift each kernel took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub epoch: usize,
    pub lambda_max: Vec<f64>,
    pub loss: f64,
    pub miou: f64,
    pub applied_shift_nm: Vec<f64>,
}

/// Knockout or weakness applied to one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModifier {
    pub kernel: usize,
    pub mode: ModifierMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModifierMode {
    Knockout,
    Weakness { gain: f64 },
}

/// Environmental transform chain applied around rendering: cube-side
/// attenuation, bioluminescence masking and dimming, then map-side noise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvPipeline {
    pub attenuation: Option<AttenuationSetting>,
    pub bioluminescence: Option<BioluminescenceSpec>,
    pub dim_factor: Option<f64>,
    pub noise_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationSetting {
    pub depth_m: f64,
    pub model: AttenuationModel,
}

impl EnvPipeline {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_attenuation(mut self, depth_m: f64, model: AttenuationModel) -> Self {
        self.attenuation = Some(AttenuationSetting { depth_m, model });
        self
    }

    pub fn with_bioluminescence(mut self, bio_label: u8) -> Self {
        self.bioluminescence = Some(BioluminescenceSpec { bio_label });
        self
    }

    pub fn with_dim(mut self, factor: f64) -> Self {
        self.dim_factor = Some(factor);
        self
    }

    pub fn with_noise(mut self, tau: f64) -> Self {
        self.noise_tau = Some(tau);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bioluminescence.is_some() && self.attenuation.is_none() {
            return Err(Error::parameter(
                "bioluminescence",
                "requires attenuation: there is nothing to be exempt from",
            ));
        }
        Ok(())
    }

    /// Applies the cube-side transforms: attenuate, splice bioluminescent
    /// pixels back in, then dim.
    pub fn apply_cube(&self, cube: &HsiCube) -> Result<HsiCube> {
        self.validate()?;
        let mut out = match &self.attenuation {
            Some(setting) => {
                let attenuated = attenuate(cube, setting.depth_m, &setting.model)?;
                match self.bioluminescence {
                    Some(spec) => bioluminesce(cube, &attenuated, spec)?,
                    None => attenuated,
                }
            }
            None => cube.clone(),
        };
        if let Some(factor) = self.dim_factor {
            out = dim(&out, factor)?;
        }
        Ok(out)
    }

    /// Applies the map-side transform (noise), keyed on a per-call seed so
    /// each epoch and scene draws an independent stream.
    pub fn apply_map(&self, map: &ChannelMap, seed: u64) -> Result<ChannelMap> {
        match self.noise_tau {
            Some(tau) => add_noise(map, &NoiseModel::new(tau, seed)?),
            None => Ok(map.clone()),
        }
    }
}

/// Adam moment buffers for the head and per-kernel wavelengths.
#[derive(Debug, Clone)]
pub struct OptimState {
    step: usize,
    head_m: HeadGradients,
    head_v: HeadGradients,
    lambda_m: Vec<f64>,
    lambda_v: Vec<f64>,
}

impl OptimState {
    pub fn new(bank: &OpsinBank, head: &PerceptionHead) -> Self {
        Self {
            step: 0,
            head_m: HeadGradients::zeros_like(head),
            head_v: HeadGradients::zeros_like(head),
            lambda_m: vec![0.0; bank.len()],
            lambda_v: vec![0.0; bank.len()],
        }
    }
}

/// Loss, mIoU and gradients aggregated over a scene set at fixed parameters.
#[derive(Debug, Clone)]
pub struct EpochEval {
    /// Mean over scenes of the per-scene mean cross-entropy.
    pub loss: f64,
    /// Mean over scenes of the per-scene mIoU.
    pub miou: f64,
    pub grad_head: HeadGradients,
    /// d loss / d lambda_max per kernel, via the analytic weight gradient.
    pub grad_lambda: Vec<f64>,
}

fn check_scene_set(scenes: &[HsiCube]) -> Result<()> {
    let first = scenes
        .first()
        .ok_or_else(|| Error::parameter("scenes", "scene set must not be empty"))?;
    for (i, s) in scenes.iter().enumerate().skip(1) {
        if s.grid() != first.grid() {
            return Err(Error::dimension(format!("scene {i} grid differs from scene 0")));
        }
        if s.num_classes() != first.num_classes() {
            return Err(Error::dimension(format!(
                "scene {i} has {} classes, scene 0 has {}",
                s.num_classes(),
                first.num_classes()
            )));
        }
    }
    Ok(())
}

/// Forward and backward over the whole scene set at the current parameters.
///
/// The noise stream is keyed on (config seed, scene index, epoch), so a
/// given epoch is reproducible in isolation and scenes may be evaluated in
/// any order.
pub fn evaluate_epoch(
    bank: &OpsinBank,
    head: &PerceptionHead,
    scenes: &[HsiCube],
    pipeline: &EnvPipeline,
    config: &EvolutionConfig,
    epoch: usize,
) -> Result<EpochEval> {
    check_scene_set(scenes)?;
    pipeline.validate()?;
    let grid = scenes[0].grid().clone();
    let c = bank.len();
    let n = grid.len();
    let inv_scenes = 1.0 / scenes.len() as f64;

    let lambda_grad_tables: Vec<Vec<f64>> = bank
        .kernels()
        .iter()
        .map(|k| weight_gradient(k, &grid))
        .collect::<Result<_>>()?;

    let mut total = EpochEval {
        loss: 0.0,
        miou: 0.0,
        grad_head: HeadGradients::zeros_like(head),
        grad_lambda: vec![0.0; c],
    };

    for (scene_idx, cube) in scenes.iter().enumerate() {
        let transformed = pipeline.apply_cube(cube)?;
        let map = render(&transformed, bank)?;
        let noise_seed = derive_stream_seed(config.seed, scene_idx as u64, epoch as u64);
        let observed = pipeline.apply_map(&map, noise_seed)?;
        let features = featurize(&observed);
        let labels = transformed.labels();

        let report = loss_and_grads(head, &features, labels)?;
        let prediction = forward(head, &features)?;
        total.loss += report.loss * inv_scenes;
        total.miou += miou(&prediction, labels)? * inv_scenes;
        total.grad_head.accumulate_scaled(&report.grad_head, inv_scenes);

        // Chain rule into each peak wavelength: noise enters additively, so
        // the map gradient passes through it unchanged.
        let data = transformed.data();
        let pixels = transformed.height() * transformed.width();
        for ch in 0..c {
            let table = &lambda_grad_tables[ch];
            let mut acc = 0.0;
            for p in 0..pixels {
                let g = report.grad_channels[p * c + ch];
                if g == 0.0 {
                    continue;
                }
                let spectrum = &data[p * n..(p + 1) * n];
                let mut dot = 0.0;
                for i in 0..n {
                    dot += table[i] * spectrum[i];
                }
                acc += g * dot;
            }
            total.grad_lambda[ch] += acc * inv_scenes;
        }
    }

    Ok(total)
}

fn ensure_finite(eval: &EpochEval, epoch: usize) -> Result<()> {
    if !eval.loss.is_finite() {
        return Err(Error::NonFinite {
            epoch,
            message: format!("loss = {}", eval.loss),
        });
    }
    if let Some(bad) = eval.grad_head.iter().find(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            epoch,
            message: format!("head gradient = {bad}"),
        });
    }
    if let Some((i, bad)) = eval
        .grad_lambda
        .iter()
        .enumerate()
        .find(|(_, g)| !g.is_finite())
    {
        return Err(Error::NonFinite {
            epoch,
            message: format!("lambda gradient {i} = {bad}"),
        });
    }
    Ok(())
}

fn adam_delta(m: &mut f64, v: &mut f64, g: f64, lr: f64, t: usize, b1: f64, b2: f64, eps: f64) -> f64 {
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    let m_hat = *m / (1.0 - b1.powi(t as i32));
    let v_hat = *v / (1.0 - b2.powi(t as i32));
    -lr * m_hat / (v_hat.sqrt() + eps)
}

fn update_head(
    head: &mut PerceptionHead,
    grads: &HeadGradients,
    state: &mut OptimState,
    optimizer: Optimizer,
    lr: f64,
) {
    let t = state.step;
    let apply = |params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..params.len() {
            let delta = match optimizer {
                Optimizer::Sgd => -lr * grads[i],
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    adam_delta(&mut m[i], &mut v[i], grads[i], lr, t, beta1, beta2, epsilon)
                }
            };
            params[i] += delta;
        }
    };
    apply(&mut head.w1, &grads.w1, &mut state.head_m.w1, &mut state.head_v.w1);
    apply(&mut head.b1, &grads.b1, &mut state.head_m.b1, &mut state.head_v.b1);
    apply(&mut head.w2, &grads.w2, &mut state.head_m.w2, &mut state.head_v.w2);
    apply(&mut head.b2, &grads.b2, &mut state.head_m.b2, &mut state.head_v.b2);
}

/// One optimisation epoch: evaluate at the current parameters, update the
/// head, update each trainable peak wavelength, clamp the shift.
///
/// The record carries the post-update wavelengths together with the loss and
/// mIoU measured just before the update. The clamp is a projection: Adam
/// moments are not rescaled when a proposed shift is cut down.
pub fn epoch_step(
    bank: &mut OpsinBank,
    head: &mut PerceptionHead,
    scenes: &[HsiCube],
    pipeline: &EnvPipeline,
    config: &EvolutionConfig,
    state: &mut OptimState,
    epoch: usize,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let eval = evaluate_epoch(bank, head, scenes, pipeline, config, epoch)?;
    ensure_finite(&eval, epoch)?;

    state.step += 1;
    let schedule = config.schedule(epoch);
    update_head(
        head,
        &eval.grad_head,
        state,
        config.optimizer,
        config.lr_head * schedule,
    );

    let grid = scenes[0].grid();
    let window = (grid.min() - LAMBDA_MARGIN_NM, grid.max() + LAMBDA_MARGIN_NM);
    let lr_opsin = config.lr_opsin * schedule;
    let mut applied = vec![0.0; bank.len()];
    for i in 0..bank.len() {
        if !bank.kernel(i).is_trainable() {
            continue;
        }
        let proposed = match config.optimizer {
            Optimizer::Sgd => -lr_opsin * eval.grad_lambda[i],
            Optimizer::Adam { beta1, beta2, epsilon } => adam_delta(
                &mut state.lambda_m[i],
                &mut state.lambda_v[i],
                eval.grad_lambda[i],
                lr_opsin,
                state.step,
                beta1,
                beta2,
                epsilon,
            ),
        };
        let old = bank.kernel(i).lambda_max();
        let shifted = old + proposed.clamp(-config.max_shift_nm, config.max_shift_nm);
        let new = shifted.clamp(window.0, window.1);
        bank.kernel_mut(i).set_lambda_max(new);
        applied[i] = new - old;
    }

    Ok(TrajectoryRecord {
        epoch,
        lambda_max: bank.lambda_maxes(),
        loss: eval.loss,
        miou: eval.miou,
        applied_shift_nm: applied,
    })
}

/// Result of a full evolution run.
#[derive(Debug, Clone)]
pub struct EvolutionOutcome {
    /// One record per epoch, including epoch 0 (initial state, no update).
    pub records: Vec<TrajectoryRecord>,
    pub bank: OpsinBank,
    pub head: PerceptionHead,
}

/// Runs the whole protocol: initialises a head from the config seed, then
/// applies [`epoch_step`] for `config.epochs` epochs over the scene set in
/// fixed order. Deterministic given config, bank and scenes.
pub fn run_evolution(
    bank: OpsinBank,
    scenes: &[HsiCube],
    pipeline: &EnvPipeline,
    config: &EvolutionConfig,
) -> Result<EvolutionOutcome> {
    config.validate()?;
    pipeline.validate()?;
    check_scene_set(scenes)?;

    // The cube-side transforms do not depend on the epoch, so apply them
    // once. Noise stays in the per-epoch pipeline.
    let transformed: Vec<HsiCube> = scenes
        .iter()
        .map(|s| pipeline.apply_cube(s))
        .collect::<Result<_>>()?;
    let epoch_pipeline = EnvPipeline {
        noise_tau: pipeline.noise_tau,
        ..EnvPipeline::none()
    };

    let num_classes = scenes[0].num_classes();
    let mut bank = bank;
    let mut head = init_head(2 * bank.len(), DEFAULT_HIDDEN, num_classes, config.seed)?;
    let mut state = OptimState::new(&bank, &head);
    let mut records = Vec::with_capacity(config.epochs + 1);

    let initial = evaluate_epoch(&bank, &head, &transformed, &epoch_pipeline, config, 0)?;
    ensure_finite(&initial, 0)?;
    records.push(TrajectoryRecord {
        epoch: 0,
        lambda_max: bank.lambda_maxes(),
        loss: initial.loss,
        miou: initial.miou,
        applied_shift_nm: vec![0.0; bank.len()],
    });

    for epoch in 1..=config.epochs {
        records.push(epoch_step(
            &mut bank,
            &mut head,
            &transformed,
            &epoch_pipeline,
            config,
            &mut state,
            epoch,
        )?);
    }

    Ok(EvolutionOutcome {
        records,
        bank,
        head,
    })
}

/// Inserts a copy of `bank[index]` immediately after it, with the copy's
/// peak offset by a uniform draw in `[-jitter_nm, +jitter_nm]`. The copy is
/// always trainable; everything else is inherited.
pub fn duplicate_kernel(
    bank: &OpsinBank,
    index: usize,
    jitter_nm: f64,
    seed: u64,
) -> Result<OpsinBank> {
    if index >= bank.len() {
        return Err(Error::parameter(
            "index",
            format!("{index} out of range for bank of {}", bank.len()),
        ));
    }
    if !(jitter_nm >= 0.0) {
        return Err(Error::parameter(
            "jitter_nm",
            format!("{jitter_nm} must be >= 0"),
        ));
    }
    let source = *bank.kernel(index);
    let offset = if jitter_nm > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.random_range(-jitter_nm..=jitter_nm)
    } else {
        0.0
    };
    let mut copy = source.with_lambda_max(source.lambda_max() + offset);
    copy = crate::spectral::OpsinKernel::new(
        copy.lambda_max(),
        copy.sigma(),
        true,
        copy.channel_gain(),
    )?;
    let mut out = bank.clone();
    out.insert(index + 1, copy);
    Ok(out)
}

/// Applies a knockout (gain 0) or weakness (gain in (0, 1)) to one channel.
/// Peak wavelength and width are untouched.
pub fn apply_modifier(bank: &OpsinBank, modifier: ChannelModifier) -> Result<OpsinBank> {
    if modifier.kernel >= bank.len() {
        return Err(Error::parameter(
            "kernel",
            format!("{} out of range for bank of {}", modifier.kernel, bank.len()),
        ));
    }
    let gain = match modifier.mode {
        ModifierMode::Knockout => 0.0,
        ModifierMode::Weakness { gain } => {
            if !(0.0 < gain && gain < 1.0) {
                return Err(Error::parameter(
                    "gain",
                    format!("{gain} outside (0, 1) for a weakness"),
                ));
            }
            gain
        }
    };
    let mut out = bank.clone();
    out.kernel_mut(modifier.kernel).set_channel_gain(gain);
    Ok(out)
}
