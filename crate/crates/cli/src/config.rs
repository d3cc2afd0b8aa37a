//! Experiment configuration: a human-editable TOML (or JSON) file with
//! optional sections, resolved against per-experiment defaults into a fully
//! concrete form that is echoed to `resolved_config.json` and reproduces the
//! run exactly.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use opsin_evo_core::environment::AttenuationModel;
use opsin_evo_core::evolution::EvolutionConfig;
use opsin_evo_core::scene::{Layout, SpectrumTemplate};
use opsin_evo_core::spectral::{OpsinBank, OpsinKernel};

/// Marker written into every resolved config.
pub const RESOLVED_FORMAT: &str = "opsin-evo-resolved-v1";

/// The eight named protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    MammalDichromacy,
    GeneDuplication,
    ColorblindFruit,
    Khaki,
    Blueshift,
    Multirod,
    MarsVision,
    CameraDesign,
}

pub const ALL_EXPERIMENTS: [ExperimentName; 8] = [
    ExperimentName::MammalDichromacy,
    ExperimentName::GeneDuplication,
    ExperimentName::ColorblindFruit,
    ExperimentName::Khaki,
    ExperimentName::Blueshift,
    ExperimentName::Multirod,
    ExperimentName::MarsVision,
    ExperimentName::CameraDesign,
];

impl ExperimentName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MammalDichromacy => "mammal-dichromacy",
            Self::GeneDuplication => "gene-duplication",
            Self::ColorblindFruit => "colorblind-fruit",
            Self::Khaki => "khaki",
            Self::Blueshift => "blueshift",
            Self::Multirod => "multirod",
            Self::MarsVision => "mars-vision",
            Self::CameraDesign => "camera-design",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_EXPERIMENTS
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let known: Vec<&str> = ALL_EXPERIMENTS.iter().map(|n| n.as_str()).collect();
                anyhow::anyhow!("unknown experiment `{s}`; known: {}", known.join(", "))
            })
    }
}

/// Where the scene set comes from: synthesised cubes or container files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SceneSource {
    Synth {
        height: usize,
        width: usize,
        scene_count: usize,
        /// Scene `i` is generated with `seed + i`.
        seed: u64,
        grid_start_nm: f64,
        grid_stop_nm: f64,
        grid_step_nm: f64,
        layout: Layout,
        classes: Vec<SpectrumTemplate>,
    },
    Files {
        paths: Vec<PathBuf>,
    },
}

/// Attenuation profile: the built-in clear-ocean parabola or an embedded
/// sample table (tables given as files are inlined at resolution time so the
/// resolved config stands alone).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KdSpec {
    OceanicDefault,
    Table { points: Vec<(f64, f64)> },
}

impl KdSpec {
    pub fn model(&self) -> Result<AttenuationModel> {
        Ok(match self {
            KdSpec::OceanicDefault => AttenuationModel::oceanic_default(),
            KdSpec::Table { points } => AttenuationModel::from_table(points.clone())
                .context("invalid attenuation table in config")?,
        })
    }
}

/// Environment settings shared by the protocol conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    /// Water depths in metres. Empty disables attenuation; the blueshift
    /// protocol runs one condition per entry, every other protocol accepts
    /// at most one.
    pub depths_m: Vec<f64>,
    pub kd: KdSpec,
    pub dim_factor: Option<f64>,
    pub noise_tau: Option<f64>,
    pub bioluminescence_label: Option<u8>,
}

/// Gene-duplication step applied to the bank before the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicationSpec {
    pub index: usize,
    pub jitter_nm: f64,
}

/// One lighting condition for the camouflage-score protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingSpec {
    pub label: String,
    /// Uniform intensity scale; `None` leaves the scene bright.
    pub dim_factor: Option<f64>,
    pub noise_tau: Option<f64>,
    /// Reconstruction threshold used at this lighting.
    pub t: f64,
}

/// One colour-vision phenotype for the camouflage-score protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhenotypeSpec {
    Intact { label: String },
    Knockout { label: String, kernel: usize },
    Weakness { label: String, kernel: usize, gain: f64 },
}

impl PhenotypeSpec {
    pub fn label(&self) -> &str {
        match self {
            Self::Intact { label } => label,
            Self::Knockout { label, .. } => label,
            Self::Weakness { label, .. } => label,
        }
    }
}

/// Settings for the scoring protocol (colorblind-fruit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringSpec {
    /// Class whose pixels form the foreground mask.
    pub mask_class: u8,
    pub lightings: Vec<LightingSpec>,
    pub phenotypes: Vec<PhenotypeSpec>,
}

/// Fully concrete experiment description. Serialising and reparsing this
/// reproduces the identical run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub format: String,
    pub name: ExperimentName,
    pub scene: SceneSource,
    pub env: EnvSpec,
    pub bank: Vec<OpsinKernel>,
    pub duplication: Option<DuplicationSpec>,
    pub evolution: EvolutionConfig,
    pub scoring: Option<ScoringSpec>,
    /// Not part of the config hash: moving outputs must not change identity.
    pub out_dir: Option<PathBuf>,
}

impl ResolvedConfig {
    pub fn bank(&self) -> Result<OpsinBank> {
        OpsinBank::new(self.bank.clone()).context("invalid bank in config")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != RESOLVED_FORMAT {
            bail!(
                "unsupported resolved format `{}` (expected `{RESOLVED_FORMAT}`)",
                self.format
            );
        }
        if self.bank.is_empty() {
            bail!("bank must hold at least one kernel");
        }
        if self.env.bioluminescence_label.is_some() && self.env.depths_m.is_empty() {
            bail!("bioluminescence requires attenuation: set env.depths_m");
        }
        if self.name != ExperimentName::Blueshift && self.env.depths_m.len() > 1 {
            bail!(
                "{} takes at most one depth, got {:?}",
                self.name,
                self.env.depths_m
            );
        }
        if let Some(d) = self.env.dim_factor {
            if !(d > 0.0 && d <= 1.0) {
                bail!("env.dim_factor {d} outside (0, 1]");
            }
        }
        if let SceneSource::Files { paths } = &self.scene {
            for p in paths {
                if !p.exists() {
                    bail!("scene file {} does not exist", p.display());
                }
            }
        }
        if let Some(dup) = &self.duplication {
            if dup.index >= self.bank.len() {
                bail!(
                    "duplication.index {} out of range for bank of {}",
                    dup.index,
                    self.bank.len()
                );
            }
        }
        if self.name == ExperimentName::ColorblindFruit {
            let scoring = self
                .scoring
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("colorblind-fruit needs a [scoring] section"))?;
            if scoring.lightings.is_empty() || scoring.phenotypes.is_empty() {
                bail!("scoring needs at least one lighting and one phenotype");
            }
            for l in &scoring.lightings {
                if !(l.t > 0.0) {
                    bail!("scoring lighting `{}` has t = {} <= 0", l.label, l.t);
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw (on-disk) form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: String,
    pub out_dir: Option<PathBuf>,
    pub scene: Option<RawScene>,
    pub env: Option<RawEnv>,
    pub bank: Option<RawBank>,
    pub duplication: Option<DuplicationSpec>,
    pub evolution: Option<RawEvolution>,
    pub scoring: Option<ScoringSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScene {
    pub input_paths: Option<Vec<PathBuf>>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub scene_count: Option<usize>,
    pub seed: Option<u64>,
    pub grid_start_nm: Option<f64>,
    pub grid_stop_nm: Option<f64>,
    pub grid_step_nm: Option<f64>,
    pub layout: Option<Layout>,
    pub classes: Option<Vec<SpectrumTemplate>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEnv {
    pub depths_m: Option<Vec<f64>>,
    /// Path to a two-column (nm, 1/m) text table; inlined at resolution.
    pub kd_table: Option<PathBuf>,
    pub dim_factor: Option<f64>,
    pub noise_tau: Option<f64>,
    pub bioluminescence_label: Option<u8>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBank {
    pub lambda_max: Vec<f64>,
    /// One width per kernel, or a single value broadcast to all.
    pub sigma: Option<Vec<f64>>,
    pub trainable: Option<Vec<bool>>,
    pub channel_gain: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEvolution {
    pub epochs: Option<usize>,
    pub lr_opsin: Option<f64>,
    pub lr_head: Option<f64>,
    pub max_shift_nm: Option<f64>,
    /// `"adam"` or `"sgd"`.
    pub optimizer: Option<String>,
    pub cosine_schedule: Option<bool>,
    pub seed: Option<u64>,
}

impl RawBank {
    fn build(&self) -> Result<Vec<OpsinKernel>> {
        let n = self.lambda_max.len();
        if n == 0 {
            bail!("bank.lambda_max must not be empty");
        }
        let broadcast = |v: &Option<Vec<f64>>, name: &str, default: f64| -> Result<Vec<f64>> {
            match v {
                None => Ok(vec![default; n]),
                Some(xs) if xs.len() == 1 => Ok(vec![xs[0]; n]),
                Some(xs) if xs.len() == n => Ok(xs.clone()),
                Some(xs) => bail!("bank.{name} has {} entries for {n} kernels", xs.len()),
            }
        };
        let sigma = broadcast(&self.sigma, "sigma", opsin_evo_core::spectral::DEFAULT_SIGMA_NM)?;
        let gain = broadcast(&self.channel_gain, "channel_gain", 1.0)?;
        let trainable = match &self.trainable {
            None => vec![true; n],
            Some(xs) if xs.len() == 1 => vec![xs[0]; n],
            Some(xs) if xs.len() == n => xs.clone(),
            Some(xs) => bail!("bank.trainable has {} entries for {n} kernels", xs.len()),
        };
        (0..n)
            .map(|i| {
                OpsinKernel::new(self.lambda_max[i], sigma[i], trainable[i], gain[i])
                    .with_context(|| format!("bank kernel {i}"))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Loading and resolution
// ---------------------------------------------------------------------------

/// Reads a config file: a resolved JSON echo is accepted as-is (and
/// re-validated), anything else is parsed as a raw config and resolved
/// against the experiment defaults.
pub fn load_config(path: &Path) -> Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        if let Ok(resolved) = serde_json::from_str::<ResolvedConfig>(&text) {
            resolved.validate()?;
            return Ok(resolved);
        }
        let raw: RawConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing JSON config {}", path.display()))?;
        return resolve(raw);
    }
    let raw: RawConfig =
        toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?;
    resolve(raw)
}

/// Fills every omitted field from the named experiment's defaults.
pub fn resolve(raw: RawConfig) -> Result<ResolvedConfig> {
    let name: ExperimentName = raw.name.parse()?;
    let mut resolved = crate::defaults::defaults_for(name);
    resolved.out_dir = raw.out_dir.or(resolved.out_dir);

    if let Some(scene) = raw.scene {
        resolved.scene = merge_scene(resolved.scene, scene)?;
    }
    if let Some(env) = raw.env {
        if let Some(d) = env.depths_m {
            resolved.env.depths_m = d;
        }
        if let Some(path) = env.kd_table {
            let model = AttenuationModel::from_file(&path)
                .with_context(|| format!("loading kd table {}", path.display()))?;
            resolved.env.kd = KdSpec::Table {
                points: model.samples().collect(),
            };
        }
        if env.dim_factor.is_some() {
            resolved.env.dim_factor = env.dim_factor;
        }
        if env.noise_tau.is_some() {
            resolved.env.noise_tau = env.noise_tau;
        }
        if env.bioluminescence_label.is_some() {
            resolved.env.bioluminescence_label = env.bioluminescence_label;
        }
    }
    if let Some(bank) = raw.bank {
        resolved.bank = bank.build()?;
    }
    if raw.duplication.is_some() {
        resolved.duplication = raw.duplication;
    }
    if let Some(evo) = raw.evolution {
        let e = &mut resolved.evolution;
        if let Some(v) = evo.epochs {
            e.epochs = v;
        }
        if let Some(v) = evo.lr_opsin {
            e.lr_opsin = v;
        }
        if let Some(v) = evo.lr_head {
            e.lr_head = v;
        }
        if let Some(v) = evo.max_shift_nm {
            e.max_shift_nm = v;
        }
        if let Some(v) = evo.optimizer {
            e.optimizer = match v.as_str() {
                "adam" => opsin_evo_core::evolution::Optimizer::adam(),
                "sgd" => opsin_evo_core::evolution::Optimizer::Sgd,
                other => bail!("unknown optimizer `{other}` (use \"adam\" or \"sgd\")"),
            };
        }
        if let Some(v) = evo.cosine_schedule {
            e.cosine_schedule = v;
        }
        if let Some(v) = evo.seed {
            e.seed = v;
        }
    }
    if raw.scoring.is_some() {
        resolved.scoring = raw.scoring;
    }

    resolved.validate()?;
    Ok(resolved)
}

fn merge_scene(base: SceneSource, raw: RawScene) -> Result<SceneSource> {
    if let Some(paths) = raw.input_paths {
        return Ok(SceneSource::Files { paths });
    }
    let SceneSource::Synth {
        mut height,
        mut width,
        mut scene_count,
        mut seed,
        mut grid_start_nm,
        mut grid_stop_nm,
        mut grid_step_nm,
        mut layout,
        mut classes,
    } = base
    else {
        bail!("defaults are always synthetic");
    };
    if let Some(v) = raw.height {
        height = v;
    }
    if let Some(v) = raw.width {
        width = v;
    }
    if let Some(v) = raw.scene_count {
        scene_count = v;
    }
    if let Some(v) = raw.seed {
        seed = v;
    }
    if let Some(v) = raw.grid_start_nm {
        grid_start_nm = v;
    }
    if let Some(v) = raw.grid_stop_nm {
        grid_stop_nm = v;
    }
    if let Some(v) = raw.grid_step_nm {
        grid_step_nm = v;
    }
    if let Some(v) = raw.layout {
        layout = v;
    }
    if let Some(v) = raw.classes {
        classes = v;
    }
    Ok(SceneSource::Synth {
        height,
        width,
        scene_count,
        seed,
        grid_start_nm,
        grid_stop_nm,
        grid_step_nm,
        layout,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_is_rejected_with_the_roster() {
        let raw = RawConfig {
            name: "volcano-vision".into(),
            ..RawConfig::default()
        };
        let err = resolve(raw).unwrap_err().to_string();
        assert!(err.contains("unknown experiment"), "{err}");
        assert!(err.contains("blueshift"), "{err}");
    }

    #[test]
    fn defaults_resolve_for_every_experiment() {
        for name in ALL_EXPERIMENTS {
            let raw = RawConfig {
                name: name.as_str().into(),
                ..RawConfig::default()
            };
            let resolved = resolve(raw).unwrap();
            assert_eq!(resolved.name, name);
            resolved.validate().unwrap();
            resolved.bank().unwrap();
        }
    }

    #[test]
    fn resolution_is_idempotent_through_json() {
        let raw = RawConfig {
            name: "blueshift".into(),
            ..RawConfig::default()
        };
        let resolved = resolve(raw).unwrap();
        let json = serde_json::to_string_pretty(&resolved).unwrap();
        let reparsed: ResolvedConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(resolved, reparsed);
    }

    #[test]
    fn overrides_land_in_the_resolved_config() {
        let toml = r#"
            name = "blueshift"
            [env]
            depths_m = [0.0, 25.0]
            noise_tau = 0.05
            [bank]
            lambda_max = [500.0]
            sigma = [20.0]
            [evolution]
            epochs = 10
            optimizer = "sgd"
        "#;
        let raw: RawConfig = toml::from_str(toml).unwrap();
        let resolved = resolve(raw).unwrap();
        assert_eq!(resolved.env.depths_m, vec![0.0, 25.0]);
        assert_eq!(resolved.env.noise_tau, Some(0.05));
        assert_eq!(resolved.bank.len(), 1);
        assert_eq!(resolved.bank[0].lambda_max(), 500.0);
        assert_eq!(resolved.bank[0].sigma(), 20.0);
        assert_eq!(resolved.evolution.epochs, 10);
        assert_eq!(
            resolved.evolution.optimizer,
            opsin_evo_core::evolution::Optimizer::Sgd
        );
    }

    #[test]
    fn depth_lists_are_blueshift_only() {
        let toml = r#"
            name = "khaki"
            [env]
            depths_m = [0.0, 25.0]
        "#;
        let raw: RawConfig = toml::from_str(toml).unwrap();
        assert!(resolve(raw).unwrap_err().to_string().contains("at most one depth"));
    }

    #[test]
    fn bank_broadcasting_and_validation() {
        let bank = RawBank {
            lambda_max: vec![500.0, 550.0, 600.0],
            sigma: Some(vec![20.0]),
            trainable: Some(vec![true, false, true]),
            channel_gain: None,
        };
        let kernels = bank.build().unwrap();
        assert!(kernels.iter().all(|k| k.sigma() == 20.0));
        assert!(!kernels[1].is_trainable());

        let bad = RawBank {
            lambda_max: vec![500.0, 550.0],
            sigma: Some(vec![20.0, 25.0, 30.0]),
            ..RawBank::default()
        };
        assert!(bad.build().is_err());
        let bad_sigma = RawBank {
            lambda_max: vec![500.0],
            sigma: Some(vec![-1.0]),
            ..RawBank::default()
        };
        assert!(bad_sigma.build().is_err());
    }

    #[test]
    fn bioluminescence_without_depth_is_a_config_error() {
        let toml = r#"
            name = "multirod"
            [env]
            depths_m = []
            bioluminescence_label = 2
        "#;
        let raw: RawConfig = toml::from_str(toml).unwrap();
        let err = resolve(raw).unwrap_err().to_string();
        assert!(err.contains("bioluminescence requires attenuation"), "{err}");
    }
}
