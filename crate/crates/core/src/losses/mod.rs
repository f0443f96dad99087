//! Supervision terms for the blended image, the reflection and base buffers
//! and the predicted normals, and their weighted total.

mod ssim;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ssim::{dssim, dssim_with_grad, C1, C2, SIGMA, WINDOW};

use crate::error::{Error, Result};
use crate::imaging::{dot, ensure_size, norm, ImageBuffer, NormalMap, ScalarMap};
use crate::normals::{best_candidate, candidate_set, CandidateRule};
use crate::stats;

fn default_lambda() -> f64 {
    0.2
}
fn default_eta_rgb() -> f64 {
    1.0
}
fn default_eta_half() -> f64 {
    0.5
}
fn default_eta_normal() -> f64 {
    0.1
}
fn default_tau() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default = "default_lambda")]
    pub lambda_rgb: f64,
    #[serde(default = "default_lambda")]
    pub lambda_refl: f64,
    #[serde(default = "default_lambda")]
    pub lambda_base: f64,
    #[serde(default = "default_eta_rgb")]
    pub eta_rgb: f64,
    #[serde(default = "default_eta_half")]
    pub eta_refl: f64,
    #[serde(default = "default_eta_half")]
    pub eta_base: f64,
    #[serde(default = "default_eta_normal")]
    pub eta_normal: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub candidate_rule: CandidateRule,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_rgb: default_lambda(),
            lambda_refl: default_lambda(),
            lambda_base: default_lambda(),
            eta_rgb: default_eta_rgb(),
            eta_refl: default_eta_half(),
            eta_base: default_eta_half(),
            eta_normal: default_eta_normal(),
            tau: default_tau(),
            candidate_rule: CandidateRule::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, l) in [
            ("lambda_rgb", self.lambda_rgb),
            ("lambda_refl", self.lambda_refl),
            ("lambda_base", self.lambda_base),
        ] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {l}")));
            }
        }
        for (name, e) in [
            ("eta_rgb", self.eta_rgb),
            ("eta_refl", self.eta_refl),
            ("eta_base", self.eta_base),
            ("eta_normal", self.eta_normal),
        ] {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {e}")));
            }
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1), got {}", self.tau)));
        }
        Ok(())
    }

    pub fn etas(&self) -> [f64; 4] {
        [self.eta_rgb, self.eta_refl, self.eta_base, self.eta_normal]
    }
}

/// Mean absolute difference over all pixels and channels.
pub fn l1(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_dims(b, "l1")?;
    let d: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).collect();
    Ok(stats::mean(&d))
}

fn l1_with_grad(a: &ImageBuffer, b: &ImageBuffer) -> Result<(f64, Vec<f64>)> {
    let v = l1(a, b)?;
    let n = a.data().len().max(1) as f64;
    let g = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x - y;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((v, g))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// `(1 - lambda) * l1 + lambda * dssim`. The D-SSIM part is skipped when
/// `lambda` is 0.
pub fn weighted_image_loss(pred: &ImageBuffer, target: &ImageBuffer, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mut v = (1.0 - lambda) * l1(pred, target)?;
    if lambda > 0.0 {
        v += lambda * dssim(pred, target)?;
    }
    Ok(v)
}

/// [`weighted_image_loss`] and its gradient with respect to `pred`.
pub fn weighted_image_loss_with_grad(
    pred: &ImageBuffer,
    target: &ImageBuffer,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    check_lambda(lambda)?;
    let (l, mut g) = l1_with_grad(pred, target)?;
    let mut v = (1.0 - lambda) * l;
    g.iter_mut().for_each(|x| *x *= 1.0 - lambda);
    if lambda > 0.0 {
        let (d, gd) = dssim_with_grad(pred, target)?;
        v += lambda * d;
        g.iter_mut().zip(gd).for_each(|(x, y)| *x += lambda * y);
    }
    Ok((v, g))
}

fn normal_inputs(n_pred: &NormalMap, n_pol: &NormalMap, dolp: &ScalarMap) -> Result<()> {
    let size = (n_pred.width(), n_pred.height());
    ensure_size(size, n_pol.dims(), "polarization normals")?;
    ensure_size(size, dolp.dims(), "DoLP map")
}

/// Per-pixel terms `1 - cos(n_pred, c*)` and the gradient of each with respect
/// to the raw predicted vector, for gated pixels only.
fn normal_terms(
    n_pred: &NormalMap,
    n_pol: &NormalMap,
    dolp: &ScalarMap,
    tau: f64,
    rule: CandidateRule,
) -> Vec<(usize, f64, [f64; 3])> {
    let mut out = Vec::new();
    for k in 0..n_pred.normals().len() {
        if !(dolp.data()[k] > tau && n_pol.valid()[k] && n_pred.valid()[k]) {
            continue;
        }
        let n = n_pred.normals()[k];
        let cands = candidate_set(n_pol.normals()[k], rule);
        let c = cands[best_candidate(&cands, &n)];
        if n == c {
            out.push((k, 0.0, [0.0; 3]));
            continue;
        }
        let len = norm(&n);
        let cos = dot(&n, &c) / len;
        let grad = [0, 1, 2].map(|j| -(c[j] - cos * n[j] / len) / len);
        out.push((k, 1.0 - cos, grad));
    }
    out
}

/// Mean over gated pixels (DoLP > tau, valid polarization and predicted
/// normals) of the smallest `1 - cos` between the prediction and the
/// candidate set of the polarization normal. Zero when no pixel is gated.
pub fn loss_normal(n_pred: &NormalMap, n_pol: &NormalMap, dolp: &ScalarMap, cfg: &LossConfig) -> Result<f64> {
    normal_inputs(n_pred, n_pol, dolp)?;
    let terms = normal_terms(n_pred, n_pol, dolp, cfg.tau, cfg.candidate_rule);
    Ok(stats::mean(&terms.iter().map(|t| t.1).collect::<Vec<_>>()))
}

/// [`loss_normal`] and its gradient with respect to the predicted vectors.
/// At ties the first minimising candidate is differentiated.
pub fn loss_normal_with_grad(
    n_pred: &NormalMap,
    n_pol: &NormalMap,
    dolp: &ScalarMap,
    cfg: &LossConfig,
) -> Result<(f64, Vec<[f64; 3]>)> {
    normal_inputs(n_pred, n_pol, dolp)?;
    let terms = normal_terms(n_pred, n_pol, dolp, cfg.tau, cfg.candidate_rule);
    let value = stats::mean(&terms.iter().map(|t| t.1).collect::<Vec<_>>());
    let mut grad = vec![[0.0; 3]; n_pred.normals().len()];
    let inv = if terms.is_empty() { 0.0 } else { 1.0 / terms.len() as f64 };
    for (k, _, g) in terms {
        grad[k] = g.map(|v| v * inv);
    }
    Ok((value, grad))
}

/// Predicted buffers and their supervision targets.
#[derive(Debug, Clone, Copy)]
pub struct LossImages<'a> {
    pub final_image: &'a ImageBuffer,
    pub rgb: &'a ImageBuffer,
    pub refl: &'a ImageBuffer,
    pub sp: &'a ImageBuffer,
    pub base: &'a ImageBuffer,
    pub dp: &'a ImageBuffer,
}

#[derive(Debug, Clone, Copy)]
pub struct LossNormals<'a> {
    pub pred: &'a NormalMap,
    pub pol: &'a NormalMap,
}

/// Unweighted gradient of each term with respect to the buffer it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub final_image: Vec<f64>,
    pub refl: Vec<f64>,
    pub base: Vec<f64>,
    pub normals: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub rgb: f64,
    pub refl: f64,
    pub base: f64,
    pub normal: f64,
    pub total: f64,
    pub gradients: Option<LossGradients>,
}

impl LossReport {
    pub fn terms(&self) -> [f64; 4] {
        [self.rgb, self.refl, self.base, self.normal]
    }
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rgb = {:.12e}", self.rgb)?;
        writeln!(f, "refl = {:.12e}", self.refl)?;
        writeln!(f, "base = {:.12e}", self.base)?;
        writeln!(f, "normal = {:.12e}", self.normal)?;
        write!(f, "total = {:.12e}", self.total)
    }
}

/// Weighted sum of the four terms, in fixed order.
pub fn weighted_total(terms: [f64; 4], etas: [f64; 4]) -> f64 {
    terms.iter().zip(etas).map(|(t, e)| t * e).sum()
}

pub fn total_loss(
    images: &LossImages<'_>,
    normals: &LossNormals<'_>,
    dolp: &ScalarMap,
    cfg: &LossConfig,
    gradients: bool,
) -> Result<LossReport> {
    cfg.validate()?;
    images.final_image.ensure_same_dims(images.rgb, "rgb target")?;
    images.refl.ensure_same_dims(images.sp, "specular target")?;
    images.base.ensure_same_dims(images.dp, "diffuse target")?;
    images.final_image.ensure_same_dims(images.refl, "reflection buffer")?;
    images.final_image.ensure_same_dims(images.base, "base buffer")?;
    let size = (images.final_image.width(), images.final_image.height());
    ensure_size(size, normals.pred.dims(), "predicted normals")?;

    let report = if gradients {
        let (rgb, g_final) = weighted_image_loss_with_grad(images.final_image, images.rgb, cfg.lambda_rgb)?;
        let (refl, g_refl) = weighted_image_loss_with_grad(images.refl, images.sp, cfg.lambda_refl)?;
        let (base, g_base) = weighted_image_loss_with_grad(images.base, images.dp, cfg.lambda_base)?;
        let (normal, g_n) = loss_normal_with_grad(normals.pred, normals.pol, dolp, cfg)?;
        let terms = [rgb, refl, base, normal];
        LossReport {
            rgb,
            refl,
            base,
            normal,
            total: weighted_total(terms, cfg.etas()),
            gradients: Some(LossGradients {
                final_image: g_final,
                refl: g_refl,
                base: g_base,
                normals: g_n,
            }),
        }
    } else {
        let rgb = weighted_image_loss(images.final_image, images.rgb, cfg.lambda_rgb)?;
        let refl = weighted_image_loss(images.refl, images.sp, cfg.lambda_refl)?;
        let base = weighted_image_loss(images.base, images.dp, cfg.lambda_base)?;
        let normal = loss_normal(normals.pred, normals.pol, dolp, cfg)?;
        LossReport {
            rgb,
            refl,
            base,
            normal,
            total: weighted_total([rgb, refl, base, normal], cfg.etas()),
            gradients: None,
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normals::normal_from_angles;

    fn img(w: usize, h: usize, v: f64) -> ImageBuffer {
        ImageBuffer::filled(w, h, 1, v)
    }

    #[test]
    fn l1_examples() {
        let a = img(4, 4, 0.3);
        assert_eq!(l1(&a, &a).unwrap(), 0.0);
        assert_eq!(l1(&img(4, 4, 0.0), &img(4, 4, 1.0)).unwrap(), 1.0);
        assert!((l1(&img(4, 4, 0.2), &img(4, 4, 0.5)).unwrap() - 0.3).abs() < 1e-15);
        assert!(l1(&img(4, 4, 0.2), &img(4, 3, 0.5)).is_err());
    }

    #[test]
    fn dssim_closed_forms() {
        let a = img(16, 16, 0.4);
        assert!(dssim(&a, &a).unwrap().abs() < 1e-15);
        // Constant images: sigma terms vanish and SSIM = C1 / (1 + C1).
        let want = 0.5 * (1.0 - C1 / (1.0 + C1));
        assert!((dssim(&img(16, 16, 0.0), &img(16, 16, 1.0)).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.49995).abs() < 1e-6);
    }

    #[test]
    fn dssim_constant_shift_bound() {
        // Shift of eps on a mid-grey image: D-SSIM = eps^2 / (2 (mx^2 + my^2 + C1)).
        let base: Vec<f64> = (0..256).map(|k| 0.3 + 0.4 * ((k * 29 % 17) as f64 / 17.0)).collect();
        let a = ImageBuffer::new(16, 16, 1, base.clone()).unwrap();
        let b = ImageBuffer::new(16, 16, 1, base.iter().map(|v| v + 1e-3).collect()).unwrap();
        assert!(dssim(&a, &b).unwrap() < 1e-4);
    }

    #[test]
    fn weighted_loss_endpoints() {
        let a = ImageBuffer::new(12, 12, 1, (0..144).map(|k| (k % 7) as f64 / 7.0).collect()).unwrap();
        let b = img(12, 12, 0.5);
        assert_eq!(weighted_image_loss(&a, &b, 0.0).unwrap(), l1(&a, &b).unwrap());
        assert!((weighted_image_loss(&a, &b, 1.0).unwrap() - dssim(&a, &b).unwrap()).abs() < 1e-15);
        assert_eq!(weighted_image_loss(&a, &a, 0.3).unwrap(), 0.0);
        assert!(weighted_image_loss(&a, &b, 1.5).is_err());
    }

    #[test]
    fn normal_loss_examples() {
        let cfg = LossConfig::default();
        let z = NormalMap::uniform(3, 3, [0.0, 0.0, 1.0]).unwrap();
        let x = NormalMap::uniform(3, 3, [1.0, 0.0, 0.0]).unwrap();
        let gated = ScalarMap::filled(3, 3, 0.5);
        assert!((loss_normal(&z, &x, &gated, &cfg).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(loss_normal(&z, &x, &ScalarMap::filled(3, 3, 0.1), &cfg).unwrap(), 0.0);
        let n = normal_from_angles(0.8, 2.0);
        let pol = NormalMap::uniform(3, 3, n).unwrap();
        for c in candidate_set(n, cfg.candidate_rule) {
            let pred = NormalMap::uniform(3, 3, c).unwrap();
            assert!(loss_normal(&pred, &pol, &gated, &cfg).unwrap() < 1e-15);
        }
    }
}
