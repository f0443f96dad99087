//! Analytic polarized renderer for sphere and plane scenes under an
//! orthographic camera looking down -z.
//!
//! Per pixel the zenith and azimuth of the true normal drive Snell refraction
//! and the Fresnel extrema. Each capture at polarizer angle theta is the sum
//! of the specular and diffuse profiles evaluated at `theta - sigma - pi/2`,
//! so the diffuse polarization angle equals the normal azimuth modulo pi.
//!
//! Specular light comes from a smooth environment lobe `(1 + w . l) / 2`
//! sampled in the mirror direction `w`; diffuse light is
//! `0.1 + 0.9 * max(n . l, 0)`.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::{self, AnglePair, MaterialConfig};
use crate::imaging::{ImageBuffer, Mask, NormalMap, PolarStack, ScalarMap};
use crate::normals::normal_from_angles;
use crate::separation::{diffuse_profile, specular_profile};

/// Zenith angles are capped here to keep the Fresnel terms finite at the limb.
pub const MAX_ZENITH: f64 = 1.55;
const POLARIZER_ANGLES: [f64; 4] = [0.0, FRAC_PI_2 / 2.0, FRAC_PI_2, 3.0 * FRAC_PI_2 / 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Infinite plane whose normal has the given zenith and azimuth (radians).
    Plane { zenith: f64, azimuth: f64 },
    /// Sphere in normalised image coordinates ([-1, 1] across the frame, y up).
    Sphere { radius: f64, center: [f64; 2] },
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::Sphere {
            radius: 0.9,
            center: [0.0, 0.0],
        }
    }
}

fn default_k() -> f64 {
    1.5
}
fn default_albedo() -> f64 {
    0.5
}
fn default_specular_weight() -> f64 {
    0.5
}
fn default_light() -> [f64; 3] {
    [0.4, 0.3, 0.866]
}
fn default_resolution() -> usize {
    64
}
fn default_background() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default = "default_k")]
    pub refractive_index: f64,
    #[serde(default = "default_albedo")]
    pub albedo: f64,
    #[serde(default = "default_specular_weight")]
    pub specular_weight: f64,
    /// Direction toward the light; normalised internally.
    #[serde(default = "default_light")]
    pub light: [f64; 3],
    /// Square frame side in pixels.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Unpolarized intensity outside the object.
    #[serde(default = "default_background")]
    pub background: f64,
    /// Standard deviation of additive Gaussian noise on every capture.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            refractive_index: default_k(),
            albedo: default_albedo(),
            specular_weight: default_specular_weight(),
            light: default_light(),
            resolution: default_resolution(),
            background: default_background(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<MaterialConfig> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.resolution < 16 {
            return bad(format!("resolution must be >= 16, got {}", self.resolution));
        }
        if !(0.0..=1.0).contains(&self.specular_weight) {
            return bad(format!("specular_weight must lie in [0, 1], got {}", self.specular_weight));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return bad(format!("albedo must lie in [0, 1], got {}", self.albedo));
        }
        if !(self.background.is_finite() && self.background >= 0.0) {
            return bad(format!("background must be >= 0, got {}", self.background));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        let l = self.light;
        if !(l.iter().all(|v| v.is_finite()) && l.iter().map(|v| v * v).sum::<f64>() > 0.0) {
            return bad(format!("light direction must be non-zero, got {l:?}"));
        }
        match self.geometry {
            Geometry::Sphere { radius, center } => {
                if !(radius.is_finite() && radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return bad(format!("invalid sphere radius {radius} or center {center:?}"));
                }
            }
            Geometry::Plane { zenith, azimuth } => {
                if !(0.0..FRAC_PI_2).contains(&zenith) || !azimuth.is_finite() {
                    return bad(format!("plane zenith must lie in [0, pi/2), got {zenith}"));
                }
            }
        }
        MaterialConfig::new(self.refractive_index)
    }

    fn light_dir(&self) -> [f64; 3] {
        let l = self.light;
        let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
        l.map(|v| v / n)
    }

    /// True normal at pixel (x, y), or `None` for background.
    fn surface_normal(&self, x: usize, y: usize) -> Option<[f64; 3]> {
        let n = self.resolution as f64;
        let u = (x as f64 + 0.5) / n * 2.0 - 1.0;
        let v = -((y as f64 + 0.5) / n * 2.0 - 1.0);
        match self.geometry {
            Geometry::Plane { zenith, azimuth } => Some(normal_from_angles(zenith, azimuth)),
            Geometry::Sphere { radius, center } => {
                let (px, py) = ((u - center[0]) / radius, (v - center[1]) / radius);
                let r2 = px * px + py * py;
                (r2 < 1.0).then(|| [px, py, (1.0 - r2).sqrt()])
            }
        }
    }
}

/// Ground truth and captures for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBundle {
    pub spec: SceneSpec,
    pub stack: PolarStack,
    pub gt_normals: NormalMap,
    pub gt_dolp: ScalarMap,
    pub gt_sp: ImageBuffer,
    pub gt_dp: ImageBuffer,
    /// `gt_sp + gt_dp`, the polarizer-free intensity (S0 / 2).
    pub gt_rgb: ImageBuffer,
    pub background: Mask,
}

struct PixelSample {
    captures: [f64; 4],
    normal: Option<[f64; 3]>,
    dolp: f64,
    sp: f64,
    dp: f64,
}

fn shade(spec: &SceneSpec, m: &MaterialConfig, l: [f64; 3], n: Option<[f64; 3]>) -> PixelSample {
    let Some(n) = n else {
        return PixelSample {
            captures: [spec.background; 4],
            normal: None,
            dolp: 0.0,
            sp: 0.0,
            dp: spec.background,
        };
    };
    let zenith = n[2].clamp(-1.0, 1.0).acos().min(MAX_ZENITH);
    let sigma = n[1].atan2(n[0]);
    let n = normal_from_angles(zenith, sigma);
    let mirror = [2.0 * n[2] * n[0], 2.0 * n[2] * n[1], 2.0 * n[2] * n[2] - 1.0];
    let dot = |a: [f64; 3]| a[0] * l[0] + a[1] * l[1] + a[2] * l[2];
    let e_spec = spec.specular_weight * 0.5 * (1.0 + dot(mirror));
    let e_diff = spec.albedo * (0.1 + 0.9 * dot(n).max(0.0));
    let angles = AnglePair::new(zenith, m).expect("zenith is capped below pi/2");
    let sp = fresnel::fresnel_extrema_sp_or_limit(e_spec, &angles, m);
    let dp = fresnel::fresnel_extrema_dp_or_limit(e_diff, &angles, m);
    let captures = POLARIZER_ANGLES.map(|theta| {
        let t = theta - sigma - FRAC_PI_2;
        (specular_profile(sp, t) + diffuse_profile(dp, t)).max(0.0)
    });
    let mean_sp = 0.5 * (sp.0 + sp.1);
    let mean_dp = 0.5 * (dp.0 + dp.1);
    // Coefficient of cos 2t: the two profiles are in opposite phase.
    let amplitude = 0.5 * (sp.0 - sp.1) - 0.5 * (dp.0 - dp.1);
    let total = mean_sp + mean_dp;
    PixelSample {
        captures,
        normal: Some(n),
        dolp: if total > 0.0 { amplitude.abs() / total } else { 0.0 },
        sp: mean_sp,
        dp: mean_dp,
    }
}

pub fn render_synthetic(spec: &SceneSpec) -> Result<OracleBundle> {
    let m = spec.validate()?;
    let l = spec.light_dir();
    let res = spec.resolution;
    let samples: Vec<PixelSample> = (0..res * res)
        .into_par_iter()
        .map(|k| shade(spec, &m, l, spec.surface_normal(k % res, k / res)))
        .collect();

    let mut channels: [Vec<f64>; 4] = Default::default();
    for (a, ch) in channels.iter_mut().enumerate() {
        *ch = samples.iter().map(|s| s.captures[a]).collect();
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        for ch in channels.iter_mut() {
            for v in ch.iter_mut() {
                *v = (*v + noise.sample(&mut rng)).max(0.0);
            }
        }
    }
    let [i0, i45, i90, i135] = channels.map(|c| ImageBuffer::new(res, res, 1, c).expect("non-negative"));
    let stack = PolarStack::new(i0, i45, i90, i135)?;

    let normals = samples.iter().map(|s| s.normal.unwrap_or([0.0; 3])).collect();
    let valid: Vec<bool> = samples.iter().map(|s| s.normal.is_some()).collect();
    let sp: Vec<f64> = samples.iter().map(|s| s.sp).collect();
    let dp: Vec<f64> = samples.iter().map(|s| s.dp).collect();
    let rgb = sp.iter().zip(&dp).map(|(a, b)| a + b).collect();
    Ok(OracleBundle {
        spec: spec.clone(),
        stack,
        gt_normals: NormalMap::new(res, res, normals, valid.clone())?,
        gt_dolp: ScalarMap::new(res, res, samples.iter().map(|s| s.dolp).collect())?,
        gt_sp: ImageBuffer::new(res, res, 1, sp)?,
        gt_dp: ImageBuffer::new(res, res, 1, dp)?,
        gt_rgb: ImageBuffer::new(res, res, 1, rgb)?,
        background: Mask::new(res, res, valid.iter().map(|v| !v).collect())?,
    })
}
