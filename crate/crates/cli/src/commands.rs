//! Subcommand implementations. Each reads its inputs, runs one pipeline stage
//! and writes its outputs into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polarprior::blend_fit::{self, FitPriors, FitTargets};
use polarprior::imaging::{self, io};
use polarprior::losses::{self, LossImages, LossNormals};
use polarprior::{normals, separation, stokes, ImageBuffer, PolarStack, RawMosaic};

use crate::config::PipelineConfig;
use crate::{Command, StackArgs};

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_stack(args: &StackArgs) -> Result<PolarStack> {
    let p = &args.inputs;
    Ok(imaging::load_polar_stack([&p[0], &p[1], &p[2], &p[3]])?)
}

pub fn dispatch(command: Command, cfg: &PipelineConfig) -> Result<()> {
    match command {
        Command::Stokes(args) => run_stokes(&load_stack(&args)?, cfg),
        Command::Separate(args) => run_separate(&load_stack(&args)?, cfg),
        Command::Normals(args) => run_normals(&load_stack(&args)?, cfg),
        Command::Disambiguate { n_pol, prior, dolp } => run_disambiguate(&n_pol, &prior, &dolp, cfg),
        Command::LossEval {
            final_image,
            rgb,
            refl,
            sp,
            base,
            dp,
            n_pred,
            n_pol,
            dolp,
        } => {
            let img = |p: &Path| io::load_image(p);
            let (final_image, rgb, refl) = (img(&final_image)?, img(&rgb)?, img(&refl)?);
            let (sp, base, dp) = (img(&sp)?, img(&base)?, img(&dp)?);
            let n_pred = io::load_normal_map(&n_pred)?;
            let n_pol = io::load_normal_map(&n_pol)?;
            let dolp = io::load_scalar_map(&dolp)?;
            let images = LossImages {
                final_image: &final_image,
                rgb: &rgb,
                refl: &refl,
                sp: &sp,
                base: &base,
                dp: &dp,
            };
            let normals = LossNormals {
                pred: &n_pred,
                pol: &n_pol,
            };
            let report = losses::total_loss(&images, &normals, &dolp, &cfg.loss, false)?;
            println!("{report}");
            Ok(())
        }
        Command::Fit {
            scene,
            sp,
            dp,
            n_pol,
            dolp,
        } => run_fit(&scene, sp, dp, n_pol, dolp, cfg),
        Command::Synth {
            resolution,
            noise_sigma,
            seed,
        } => {
            let mut spec = cfg.synth.clone();
            if let Some(r) = resolution {
                spec.resolution = r;
            }
            if let Some(s) = noise_sigma {
                spec.noise_sigma = s;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            run_synth(&spec, cfg)
        }
        Command::Demosaic { raw } => {
            let img = io::load_image(&raw)?;
            let mosaic = RawMosaic::from_image(&img, cfg.demosaic.layout)?;
            write_stack(&out_dir(cfg)?, &imaging::demosaic(&mosaic))
        }
    }
}

fn write_stack(dir: &Path, stack: &PolarStack) -> Result<()> {
    for (name, img) in ["i0", "i45", "i90", "i135"].iter().zip(stack.channels_by_angle()) {
        io::save_image_pfm(&dir.join(format!("{name}.pfm")), img)?;
    }
    Ok(())
}

fn run_stokes(stack: &PolarStack, cfg: &PipelineConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let s = stokes::compute_stokes(stack);
    let dolp = stokes::compute_dolp(&s);
    let aolp = stokes::compute_aolp(&s);
    io::save_scalar_pfm(&dir.join("s0.pfm"), &s.s0_map())?;
    io::save_scalar_pfm(&dir.join("s1.pfm"), &s.s1_map())?;
    io::save_scalar_pfm(&dir.join("s2.pfm"), &s.s2_map())?;
    io::save_scalar_pfm(&dir.join("dolp.pfm"), &dolp)?;
    io::save_scalar_pfm(&dir.join("aolp.pfm"), &aolp.angles)?;
    io::save_mask_png(&dir.join("aolp_low_confidence.png"), &aolp.low_confidence)?;
    io::save_png16(&dir.join("dolp.png"), &io::false_color(&dolp, 0.0, 1.0))?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    io::save_png16(&dir.join("aolp.png"), &io::false_color(&aolp.angles, -half_pi, half_pi))?;
    Ok(())
}

fn run_separate(stack: &PolarStack, cfg: &PipelineConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let pair = separation::separate(stack, &cfg.material);
    io::save_image_pfm(&dir.join("i_sp.pfm"), &pair.i_sp)?;
    io::save_image_pfm(&dir.join("i_dp.pfm"), &pair.i_dp)?;
    io::save_mask_png(&dir.join("degenerate_mask.png"), &pair.degenerate_mask)?;
    io::save_png16(&dir.join("i_sp.png"), &pair.i_sp)?;
    io::save_png16(&dir.join("i_dp.png"), &pair.i_dp)?;
    Ok(())
}

fn save_normals(dir: &Path, stem: &str, n: &polarprior::NormalMap) -> Result<()> {
    io::save_normal_pfm(&dir.join(format!("{stem}.pfm")), n)?;
    io::save_png16(&dir.join(format!("{stem}.png")), &imaging::encode_normal_map(n))?;
    io::save_mask_png(&dir.join(format!("{stem}_valid.png")), &n.validity_mask())?;
    Ok(())
}

fn run_normals(stack: &PolarStack, cfg: &PipelineConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let n = normals::estimate_polar_normals(stack, &cfg.material);
    save_normals(&dir, "n_pol", &n)?;
    let dolp = stokes::compute_dolp(&stokes::compute_stokes(stack));
    io::save_scalar_pfm(&dir.join("dolp.pfm"), &dolp)?;
    Ok(())
}

fn run_disambiguate(n_pol: &Path, prior: &Path, dolp: &Path, cfg: &PipelineConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let n_pol = io::load_normal_map(n_pol)?;
    let prior = io::load_normal_map(prior)?;
    let dolp = io::load_scalar_map(dolp)?;
    let out = normals::disambiguate(&n_pol, &prior, &dolp, &cfg.disambiguation)?;
    save_normals(&dir, "n_disambiguated", &out)
}

fn run_fit(
    scene: &Path,
    sp: Option<PathBuf>,
    dp: Option<PathBuf>,
    n_pol: Option<PathBuf>,
    dolp: Option<PathBuf>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let dir = out_dir(cfg)?;
    let rgb = io::load_image(&scene.join("rgb.pfm"))?;
    let sp = io::load_image(&sp.unwrap_or_else(|| scene.join("gt_sp.pfm")))?;
    let dp = io::load_image(&dp.unwrap_or_else(|| scene.join("gt_dp.pfm")))?;
    let stack = if n_pol.is_none() || dolp.is_none() {
        let names = ["i0", "i45", "i90", "i135"].map(|n| scene.join(format!("{n}.pfm")));
        Some(imaging::load_polar_stack([&names[0], &names[1], &names[2], &names[3]])?)
    } else {
        None
    };
    let n_pol = match n_pol {
        Some(p) => io::load_normal_map(&p)?,
        None => normals::estimate_polar_normals(stack.as_ref().unwrap(), &cfg.material),
    };
    let dolp = match dolp {
        Some(p) => io::load_scalar_map(&p)?,
        None => stokes::compute_dolp(&stokes::compute_stokes(stack.as_ref().unwrap())),
    };
    let targets = FitTargets {
        rgb: &rgb,
        sp: &sp,
        dp: &dp,
    };
    let priors = FitPriors {
        n_pol: &n_pol,
        dolp: &dolp,
    };
    let state = blend_fit::fit_maps(&targets, &priors, &cfg.fit)?;
    io::save_image_pfm(&dir.join("base.pfm"), &state.base)?;
    io::save_image_pfm(&dir.join("refl.pfm"), &state.refl)?;
    io::save_image_pfm(&dir.join("strength.pfm"), &state.strength.to_image())?;
    io::save_image_pfm(&dir.join("final.pfm"), &state.final_image())?;
    io::save_normal_pfm(&dir.join("normals.pfm"), &state.normals)?;
    let mut history = String::from("# phase iteration rgb refl base normal total\n");
    for r in &state.loss_history {
        let [a, b, c, d] = r.terms;
        writeln!(history, "{} {} {a:.9e} {b:.9e} {c:.9e} {d:.9e} {:.9e}", r.phase, r.iteration, r.total)?;
    }
    fs::write(dir.join("loss_history.txt"), history)?;
    Ok(())
}

fn run_synth(spec: &polarprior::SceneSpec, cfg: &PipelineConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let b = polarprior::render_synthetic(spec)?;
    write_stack(&dir, &b.stack)?;
    io::save_normal_pfm(&dir.join("gt_normals.pfm"), &b.gt_normals)?;
    io::save_png16(&dir.join("gt_normals.png"), &imaging::encode_normal_map(&b.gt_normals))?;
    io::save_scalar_pfm(&dir.join("gt_dolp.pfm"), &b.gt_dolp)?;
    io::save_image_pfm(&dir.join("gt_sp.pfm"), &b.gt_sp)?;
    io::save_image_pfm(&dir.join("gt_dp.pfm"), &b.gt_dp)?;
    io::save_image_pfm(&dir.join("rgb.pfm"), &b.gt_rgb)?;
    io::save_png16(&dir.join("rgb.png"), &b.gt_rgb)?;
    io::save_mask_png(&dir.join("background.png"), &b.background)?;
    let raw = imaging::mosaic(&b.stack, cfg.demosaic.layout)?;
    let raw_img = ImageBuffer::new(raw.width(), raw.height(), 1, raw.data().to_vec())?;
    io::save_image_pfm(&dir.join("mosaic.pfm"), &raw_img)?;
    let manifest = format!(
        "# analytic scene; captures i0..i135, ground truth gt_*, mosaic layout {:?}\n{}",
        <[u32; 4]>::from(cfg.demosaic.layout),
        toml::to_string(spec)?
    );
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}
