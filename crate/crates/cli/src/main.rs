use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use opsin_evo::config::load_config;
use opsin_evo::{resolve_out_dir, run_and_emit};
use opsin_evo_core::camouflage::{camouflage_score, BinaryMask, CamouflageConfig};
use opsin_evo_core::scene::{save_scene, synth_scene, Layout, SceneConfig, SpectrumTemplate};
use opsin_evo_core::spectral::{render, OpsinBank, OpsinKernel, SpectralGrid};

#[derive(Parser)]
#[command(name = "opsin-evo", version, about = "Evolve Gaussian opsin banks under task pressure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment from a TOML config (or a resolved_config.json).
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's out_dir, then runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the evolution seed (head init, noise, duplication jitter).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent conditions; results do not depend
        /// on this. The OPSIN_EVO_THREADS env var takes precedence.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Generate one synthetic scene and write it to the cube container.
    Synth {
        scene_config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Camouflage-score a scene: foreground = pixels of one label class.
    Score {
        /// Scene in the cube container format.
        #[arg(long)]
        scene: PathBuf,
        /// JSON array of kernels ({"lambda_max": .., "sigma": .., ...}).
        #[arg(long)]
        bank: PathBuf,
        /// Class index whose pixels form the foreground mask.
        #[arg(long = "mask-from-labels")]
        mask_from_labels: u8,
        /// Relative reconstruction threshold.
        #[arg(long)]
        t: f64,
    },
}

/// Standalone scene recipe for `synth`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthFileConfig {
    #[serde(default = "default_dim")]
    height: usize,
    #[serde(default = "default_dim")]
    width: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_grid_start")]
    grid_start_nm: f64,
    #[serde(default = "default_grid_stop")]
    grid_stop_nm: f64,
    #[serde(default = "default_grid_step")]
    grid_step_nm: f64,
    layout: Layout,
    classes: Vec<SpectrumTemplate>,
}

fn default_dim() -> usize {
    32
}

fn default_grid_start() -> f64 {
    400.0
}

fn default_grid_stop() -> f64 {
    700.0
}

fn default_grid_step() -> f64 {
    10.0
}

fn threads_from_env(cli_threads: usize) -> Result<usize> {
    match std::env::var("OPSIN_EVO_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("OPSIN_EVO_THREADS = `{v}` is not a thread count")),
        Err(_) => Ok(cli_threads),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut resolved = load_config(&config)?;
            if let Some(seed) = seed {
                resolved.evolution.seed = seed;
            }
            let out_dir = resolve_out_dir(&resolved, out);
            let threads = threads_from_env(threads)?;
            let summary = run_and_emit(&resolved, &out_dir, threads)?;
            println!(
                "{} finished in {:.2}s -> {}",
                summary.experiment,
                summary.wall_clock_seconds,
                out_dir.display()
            );
            for condition in &summary.conditions {
                let lambdas: Vec<String> = condition
                    .final_lambda_max_nm
                    .iter()
                    .map(|l| format!("{l:.2}"))
                    .collect();
                let mut line = format!("  {}: lambda_max [{}]", condition.label, lambdas.join(", "));
                if let Some(m) = condition.final_miou {
                    line.push_str(&format!(" miou {m:.4}"));
                }
                if let Some(s) = condition.s_r {
                    line.push_str(&format!(" s_r {s:.4}"));
                }
                println!("{line}");
            }
            Ok(())
        }
        Command::Synth { scene_config, out } => {
            let text = std::fs::read_to_string(&scene_config)
                .with_context(|| format!("reading {}", scene_config.display()))?;
            let spec: SynthFileConfig = toml::from_str(&text)
                .with_context(|| format!("parsing {}", scene_config.display()))?;
            let cube = synth_scene(&SceneConfig {
                height: spec.height,
                width: spec.width,
                grid: SpectralGrid::uniform(spec.grid_start_nm, spec.grid_stop_nm, spec.grid_step_nm)?,
                classes: spec.classes,
                layout: spec.layout,
                seed: spec.seed,
            })?;
            save_scene(&cube, &out)?;
            println!(
                "wrote {}x{}x{} scene ({} classes) -> {}",
                cube.height(),
                cube.width(),
                cube.bands(),
                cube.num_classes(),
                out.display()
            );
            Ok(())
        }
        Command::Score {
            scene,
            bank,
            mask_from_labels,
            t,
        } => {
            let cube = opsin_evo_core::scene::load_scene(&scene)?;
            let text = std::fs::read_to_string(&bank)
                .with_context(|| format!("reading {}", bank.display()))?;
            let kernels: Vec<OpsinKernel> = serde_json::from_str(&text)
                .with_context(|| format!("parsing bank {}", bank.display()))?;
            let bank = OpsinBank::new(kernels)?;
            let map = render(&cube, &bank)?;
            let mask = BinaryMask::from_labels(&map, mask_from_labels);
            let score = camouflage_score(&map, &mask, &CamouflageConfig::with_threshold(t)?)?;
            println!("{}", serde_json::json!({ "s_r": score, "t": t }));
            Ok(())
        }
    }
}
