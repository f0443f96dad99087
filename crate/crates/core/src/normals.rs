//! Normals from polarization angles and their ambiguity correction against a
//! prior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::{self, MaterialConfig};
use crate::imaging::{dot, ensure_size, NormalMap, PolarStack, ScalarMap};
use crate::stokes;

/// How the second and fourth candidates are generated from the first and third.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRule {
    /// Rotation by pi about the optical axis: (x, y, z) -> (-x, -y, z).
    #[default]
    Azimuthal,
    /// Full vector negation: (x, y, z) -> (-x, -y, -z).
    Negation,
}

impl CandidateRule {
    fn flip(self, n: [f64; 3]) -> [f64; 3] {
        match self {
            CandidateRule::Azimuthal => [-n[0], -n[1], n[2]],
            CandidateRule::Negation => [-n[0], -n[1], -n[2]],
        }
    }
}

fn default_tau() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisambiguationConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub candidate_rule: CandidateRule,
}

impl Default for DisambiguationConfig {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            candidate_rule: CandidateRule::default(),
        }
    }
}

impl DisambiguationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

/// Rotation by pi/2 about the camera z-axis.
pub fn rotate_half_pi(n: [f64; 3]) -> [f64; 3] {
    [-n[1], n[0], n[2]]
}

pub fn normal_from_angles(i: f64, sigma: f64) -> [f64; 3] {
    let (si, ci) = i.sin_cos();
    [si * sigma.cos(), si * sigma.sin(), ci]
}

/// `[n, flip(n), R(n), flip(R(n))]` with R the pi/2 rotation about z.
pub fn candidate_set(n: [f64; 3], rule: CandidateRule) -> [[f64; 3]; 4] {
    let r = rotate_half_pi(n);
    [n, rule.flip(n), r, rule.flip(r)]
}

/// Index of the candidate with the largest dot product with `target`; ties go
/// to the earliest candidate.
pub fn best_candidate(candidates: &[[f64; 3]; 4], target: &[f64; 3]) -> usize {
    let mut best = 0;
    let mut best_dot = dot(&candidates[0], target);
    for (idx, c) in candidates.iter().enumerate().skip(1) {
        let d = dot(c, target);
        if d > best_dot {
            best = idx;
            best_dot = d;
        }
    }
    best
}

/// Per-pixel normal from AoLP (azimuth) and the inverted diffuse DoLP
/// (zenith). Pixels whose DoLP exceeds the material's supremum are invalid.
pub fn estimate_polar_normals(stack: &PolarStack, m: &MaterialConfig) -> NormalMap {
    let s = stokes::compute_stokes(stack);
    let dolp = stokes::compute_dolp(&s);
    let aolp = stokes::compute_aolp(&s);
    let (normals, valid): (Vec<[f64; 3]>, Vec<bool>) = (0..dolp.data().len())
        .into_par_iter()
        .map(|k| match fresnel::incidence_from_dolp(dolp.data()[k], m) {
            Ok(i) => (normal_from_angles(i, aolp.angles.data()[k]), true),
            Err(_) => ([0.0; 3], false),
        })
        .unzip();
    NormalMap::new(stack.width(), stack.height(), normals, valid).expect("unit by construction")
}

/// Replaces each gated polarization normal by the candidate closest to the
/// prior. Pixels with DoLP <= tau, or without a valid normal or prior, are
/// invalid in the output.
pub fn disambiguate(
    n_pol: &NormalMap,
    prior: &NormalMap,
    dolp: &ScalarMap,
    cfg: &DisambiguationConfig,
) -> Result<NormalMap> {
    cfg.validate()?;
    let size = (n_pol.width(), n_pol.height());
    ensure_size(size, prior.dims(), "prior normals")?;
    ensure_size(size, dolp.dims(), "DoLP map")?;
    let (normals, valid): (Vec<[f64; 3]>, Vec<bool>) = (0..n_pol.normals().len())
        .into_par_iter()
        .map(|k| {
            let gated = dolp.data()[k] > cfg.tau && n_pol.valid()[k] && prior.valid()[k];
            if !gated {
                return ([0.0; 3], false);
            }
            let cands = candidate_set(n_pol.normals()[k], cfg.candidate_rule);
            (cands[best_candidate(&cands, &prior.normals()[k])], true)
        })
        .unzip();
    NormalMap::new(size.0, size.1, normals, valid)
}
