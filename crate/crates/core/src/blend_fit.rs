//! Deferred-reflection blend and a per-pixel gradient-descent fit of the
//! base, reflection, strength and normal buffers under the total loss.
//!
//! The schedule has three phases: a warm-up on the blended image alone, a
//! joint phase with every term, and a refinement on the blended image and
//! normals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ensure_size, ImageBuffer, NormalMap, ScalarMap};
use crate::losses::{self, LossConfig, LossImages, LossNormals, LossReport};
use crate::normals::{self, DisambiguationConfig};

/// Per-pixel reflection strength, kept in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionStrengthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ReflectionStrengthMap {
    /// Values are clamped into [0, 1]; non-finite values are rejected.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let map = ScalarMap::new(width, height, data)?;
        Ok(Self {
            width,
            height,
            data: map.data().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::new(self.width, self.height, 1, self.data.clone()).expect("values in [0, 1]")
    }
}

fn check_blend_inputs(base: &ImageBuffer, refl: &ImageBuffer, strength: &ReflectionStrengthMap) -> Result<()> {
    base.ensure_same_dims(refl, "reflection buffer")?;
    ensure_size((base.width(), base.height()), (strength.width, strength.height, 1), "strength map")
}

fn pre_clamp(base: &ImageBuffer, refl: &ImageBuffer, strength: &ReflectionStrengthMap) -> Vec<f64> {
    let ch = base.channels();
    base.data()
        .iter()
        .zip(refl.data())
        .enumerate()
        .map(|(k, (b, r))| b + strength.data[k / ch] * r)
        .collect()
}

/// `clamp(base + strength * refl, 0, 1)`; strength is broadcast over channels.
pub fn blend(base: &ImageBuffer, refl: &ImageBuffer, strength: &ReflectionStrengthMap) -> Result<ImageBuffer> {
    check_blend_inputs(base, refl, strength)?;
    let data = pre_clamp(base, refl, strength).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    ImageBuffer::new(base.width(), base.height(), base.channels(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub phase: usize,
    pub iteration: usize,
    pub terms: [f64; 4],
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub base: ImageBuffer,
    pub refl: ImageBuffer,
    pub strength: ReflectionStrengthMap,
    pub normals: NormalMap,
    pub iteration: usize,
    pub loss_history: Vec<LossRecord>,
}

impl FitState {
    /// base = target, refl = 0, strength = 0, normals facing the camera.
    pub fn initial(rgb: &ImageBuffer) -> Self {
        let (w, h, c) = rgb.dims();
        Self {
            base: rgb.clone(),
            refl: ImageBuffer::filled(w, h, c, 0.0),
            strength: ReflectionStrengthMap::filled(w, h, 0.0),
            normals: NormalMap::uniform(w, h, [0.0, 0.0, 1.0]).expect("unit normal"),
            iteration: 0,
            loss_history: Vec::new(),
        }
    }

    pub fn final_image(&self) -> ImageBuffer {
        blend(&self.base, &self.refl, &self.strength).expect("state buffers are consistent")
    }
}

fn default_learning_rate() -> f64 {
    1e-3
}
fn default_iterations() -> [usize; 3] {
    [200, 1500, 300]
}
fn default_divergence_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Step size per pixel: each buffer moves by `learning_rate * P * grad`
    /// where P is the pixel count, so the step does not shrink with image size.
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Iterations of the warm-up, joint and refinement phases.
    #[serde(default = "default_iterations")]
    pub iterations: [usize; 3],
    /// Abort when a phase's loss exceeds this multiple of its starting loss.
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
    /// Term weights; configured separately from the schedule.
    #[serde(skip)]
    pub loss: LossConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            iterations: default_iterations(),
            divergence_factor: default_divergence_factor(),
            loss: LossConfig::default(),
        }
    }
}

/// Floor on the reference loss of the divergence check.
const DIVERGENCE_FLOOR: f64 = 1e-3;

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::Config(format!(
                "divergence_factor must be > 1, got {}",
                self.divergence_factor
            )));
        }
        self.loss.validate()
    }

    /// Loss weights active in `phase` (0-based): the warm-up keeps only the
    /// blended-image term, the refinement drops the reflection and base terms.
    pub fn phase_loss(&self, phase: usize) -> LossConfig {
        let mut cfg = self.loss;
        match phase {
            0 => {
                cfg.eta_refl = 0.0;
                cfg.eta_base = 0.0;
                cfg.eta_normal = 0.0;
            }
            1 => {}
            _ => {
                cfg.eta_refl = 0.0;
                cfg.eta_base = 0.0;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitTargets<'a> {
    pub rgb: &'a ImageBuffer,
    pub sp: &'a ImageBuffer,
    pub dp: &'a ImageBuffer,
}

#[derive(Debug, Clone, Copy)]
pub struct FitPriors<'a> {
    pub n_pol: &'a NormalMap,
    pub dolp: &'a ScalarMap,
}

/// Gradient of the objective with respect to every state buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGradient {
    pub base: Vec<f64>,
    pub refl: Vec<f64>,
    pub strength: Vec<f64>,
    pub normals: Vec<[f64; 3]>,
}

/// Total loss of `state` and optionally its gradient. The blend clamp passes
/// gradient where the unclamped value lies in [0, 1] and blocks it elsewhere.
pub fn objective(
    state: &FitState,
    targets: &FitTargets<'_>,
    priors: &FitPriors<'_>,
    loss: &LossConfig,
    with_gradient: bool,
) -> Result<(LossReport, Option<StateGradient>)> {
    check_blend_inputs(&state.base, &state.refl, &state.strength)?;
    let pre = pre_clamp(&state.base, &state.refl, &state.strength);
    let (w, h, ch) = state.base.dims();
    let final_image = ImageBuffer::new(w, h, ch, pre.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    let images = LossImages {
        final_image: &final_image,
        rgb: targets.rgb,
        refl: &state.refl,
        sp: targets.sp,
        base: &state.base,
        dp: targets.dp,
    };
    let normals = LossNormals {
        pred: &state.normals,
        pol: priors.n_pol,
    };
    let mut report = losses::total_loss(&images, &normals, priors.dolp, loss, with_gradient)?;
    let Some(g) = report.gradients.take() else {
        return Ok((report, None));
    };
    let g_final: Vec<f64> = g
        .final_image
        .iter()
        .zip(&pre)
        .map(|(d, p)| if (0.0..=1.0).contains(p) { loss.eta_rgb * d } else { 0.0 })
        .collect();
    let s = state.strength.data();
    let r = state.refl.data();
    let base = g_final.iter().zip(&g.base).map(|(a, b)| a + loss.eta_base * b).collect();
    let refl = g_final
        .iter()
        .zip(&g.refl)
        .enumerate()
        .map(|(k, (a, b))| a * s[k / ch] + loss.eta_refl * b)
        .collect();
    let strength = (0..w * h)
        .map(|p| (0..ch).map(|c| g_final[p * ch + c] * r[p * ch + c]).sum())
        .collect();
    let normals = g.normals.iter().map(|v| v.map(|x| loss.eta_normal * x)).collect();
    report.gradients = None;
    Ok((
        report,
        Some(StateGradient {
            base,
            refl,
            strength,
            normals,
        }),
    ))
}

/// One projected descent step: base and refl stay non-negative, strength stays
/// in [0, 1] and normals are renormalised.
pub fn apply_step(state: &mut FitState, grad: &StateGradient, learning_rate: f64) {
    let step = learning_rate * (state.base.width() * state.base.height()) as f64;
    for (v, g) in state.base.data_mut().iter_mut().zip(&grad.base) {
        *v = (*v - step * g).max(0.0);
    }
    for (v, g) in state.refl.data_mut().iter_mut().zip(&grad.refl) {
        *v = (*v - step * g).max(0.0);
    }
    for (v, g) in state.strength.data.iter_mut().zip(&grad.strength) {
        *v = (*v - step * g).clamp(0.0, 1.0);
    }
    for (n, g) in state.normals.normals_mut().iter_mut().zip(&grad.normals) {
        for j in 0..3 {
            n[j] -= step * g[j];
        }
    }
    state.normals.renormalize();
    state.iteration += 1;
}

/// Runs the three-phase schedule from [`FitState::initial`]. At the start of
/// the joint phase the polarization normals are disambiguated against the
/// current fitted normals; that map supervises the joint and refinement
/// phases.
pub fn fit_maps(targets: &FitTargets<'_>, priors: &FitPriors<'_>, cfg: &FitConfig) -> Result<FitState> {
    cfg.validate()?;
    let mut state = FitState::initial(targets.rgb);
    let mut n_pol = priors.n_pol.clone();
    for (phase, &iterations) in cfg.iterations.iter().enumerate() {
        if iterations == 0 {
            continue;
        }
        let loss = cfg.phase_loss(phase);
        if phase == 1 {
            let dis = DisambiguationConfig {
                tau: loss.tau,
                candidate_rule: loss.candidate_rule,
            };
            n_pol = normals::disambiguate(priors.n_pol, &state.normals, priors.dolp, &dis)?;
        }
        let phase_priors = FitPriors {
            n_pol: &n_pol,
            dolp: priors.dolp,
        };
        let mut limit = None;
        for it in 0..iterations {
            let (report, grad) = objective(&state, targets, &phase_priors, &loss, true)?;
            let limit = *limit.get_or_insert(cfg.divergence_factor * report.total.max(DIVERGENCE_FLOOR));
            if !report.total.is_finite() || report.total > limit {
                return Err(Error::Diverged {
                    phase: phase + 1,
                    iteration: it,
                    loss: report.total,
                    limit,
                });
            }
            state.loss_history.push(LossRecord {
                phase: phase + 1,
                iteration: state.iteration,
                terms: report.terms(),
                total: report.total,
            });
            apply_step(&mut state, &grad.expect("gradient requested"), cfg.learning_rate);
        }
    }
    Ok(state)
}
