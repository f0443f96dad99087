//! `polarprior` command-line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;

/// Environment variable capping the number of worker threads.
const THREADS_ENV: &str = "POLARPRIOR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "polarprior", version, about = "Polarization priors for reflection-aware reconstruction")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refractive index of the material.
    #[arg(long, global = true)]
    refractive_index: Option<f64>,
    /// DoLP gate for disambiguation and the normal term.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Weight of the image term.
    #[arg(long, global = true)]
    eta_rgb: Option<f64>,
    /// Weight of the reflection term.
    #[arg(long, global = true)]
    eta_refl: Option<f64>,
    /// Weight of the base term.
    #[arg(long, global = true)]
    eta_base: Option<f64>,
    /// Weight of the normal term.
    #[arg(long, global = true)]
    eta_normal: Option<f64>,
    /// D-SSIM share of the image term.
    #[arg(long, global = true)]
    lambda_rgb: Option<f64>,
    /// D-SSIM share of the reflection term.
    #[arg(long, global = true)]
    lambda_refl: Option<f64>,
    /// D-SSIM share of the base term.
    #[arg(long, global = true)]
    lambda_base: Option<f64>,
}

/// Four captures in polarizer-angle order 0, 45, 90, 135.
#[derive(Debug, Args)]
struct StackArgs {
    #[arg(num_args = 4, value_names = ["I0", "I45", "I90", "I135"], required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stokes parameters, DoLP and AoLP.
    Stokes(StackArgs),
    /// Specular and diffuse reflection images.
    Separate(StackArgs),
    /// Polarization normals from AoLP and DoLP.
    Normals(StackArgs),
    /// Resolve normal ambiguity against a prior normal map.
    Disambiguate {
        #[arg(long)]
        n_pol: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        dolp: PathBuf,
    },
    /// Evaluate the four supervision terms and their weighted total.
    LossEval {
        #[arg(long = "final")]
        final_image: PathBuf,
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        refl: PathBuf,
        #[arg(long)]
        sp: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        dp: PathBuf,
        #[arg(long)]
        n_pred: PathBuf,
        #[arg(long)]
        n_pol: PathBuf,
        #[arg(long)]
        dolp: PathBuf,
    },
    /// Fit base, reflection, strength and normal maps to a scene directory.
    Fit {
        /// Directory holding rgb.pfm, gt_sp.pfm, gt_dp.pfm and i0..i135.pfm.
        #[arg(long)]
        scene: PathBuf,
        /// Specular target (default: <scene>/gt_sp.pfm).
        #[arg(long)]
        sp: Option<PathBuf>,
        /// Diffuse target (default: <scene>/gt_dp.pfm).
        #[arg(long)]
        dp: Option<PathBuf>,
        /// Polarization normals (default: estimated from the captures).
        #[arg(long)]
        n_pol: Option<PathBuf>,
        /// DoLP map (default: computed from the captures).
        #[arg(long)]
        dolp: Option<PathBuf>,
    },
    /// Render an analytic scene with ground truth.
    Synth {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split a polarization filter array readout into four captures.
    Demosaic {
        /// Single-channel mosaic image.
        raw: PathBuf,
    },
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(k) = g.refractive_index {
        cfg.material = polarprior::MaterialConfig::new(k)?;
        cfg.synth.refractive_index = k;
    }
    if let Some(t) = g.tau {
        cfg.disambiguation.tau = t;
        cfg.loss.tau = t;
    }
    let overrides = [
        (g.eta_rgb, &mut cfg.loss.eta_rgb),
        (g.eta_refl, &mut cfg.loss.eta_refl),
        (g.eta_base, &mut cfg.loss.eta_base),
        (g.eta_normal, &mut cfg.loss.eta_normal),
        (g.lambda_rgb, &mut cfg.loss.lambda_rgb),
        (g.lambda_refl, &mut cfg.loss.lambda_refl),
        (g.lambda_base, &mut cfg.loss.lambda_base),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(out) = &g.out {
        cfg.paths.out = Some(out.clone());
    }
    cfg.finalize()
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    anyhow::ensure!(n > 0, "{THREADS_ENV} must be a positive integer, got {raw:?}");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = load_config(&cli.global)?;
    commands::dispatch(cli.command, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
