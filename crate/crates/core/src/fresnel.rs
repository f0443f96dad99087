//! Dielectric Fresnel relations: Snell refraction, the diffuse DoLP model and
//! its closed-form inversion, and the intensity extrema of reflected and
//! transmitted light.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard on alpha_plus below which the extrema are 0/0.
pub const ALPHA_EPS: f64 = 1e-6;
/// Margin kept below `d_max` when clamping saturated DoLP.
pub const SATURATION_MARGIN: f64 = 1e-6;
const GOLDEN_TOL: f64 = 1e-10;

fn default_refractive_index() -> f64 {
    1.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    #[serde(default = "default_refractive_index")]
    refractive_index: f64,
}

/// Material with a fixed refractive index `k > 1` and its cached DoLP supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMaterial", into = "RawMaterial")]
pub struct MaterialConfig {
    k: f64,
    d_max: f64,
}

impl TryFrom<RawMaterial> for MaterialConfig {
    type Error = Error;

    fn try_from(raw: RawMaterial) -> Result<Self> {
        Self::new(raw.refractive_index)
    }
}

impl From<MaterialConfig> for RawMaterial {
    fn from(m: MaterialConfig) -> Self {
        RawMaterial { refractive_index: m.k }
    }
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self::new(default_refractive_index()).expect("default index is valid")
    }
}

impl MaterialConfig {
    pub fn new(k: f64) -> Result<Self> {
        if !k.is_finite() || k <= 1.0 {
            return Err(Error::Config(format!("refractive index must be > 1, got {k}")));
        }
        let d_max = golden_section_max(|i| nayar_dolp(i, k), 0.0, FRAC_PI_2, GOLDEN_TOL);
        Ok(Self { k, d_max })
    }

    pub fn refractive_index(&self) -> f64 {
        self.k
    }

    /// Supremum of [`diffuse_dolp_forward`] over incidence angles.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Normal-incidence reflectance ((k - 1) / (k + 1))^2.
    pub fn normal_reflectance(&self) -> f64 {
        ((self.k - 1.0) / (self.k + 1.0)).powi(2)
    }
}

/// Maximum value of a unimodal `f` on `[a, b]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    f(a).max(f(b)).max(fc).max(fd)
}

/// Incidence, refraction and their sum and difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub incidence: f64,
    pub refraction: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
}

impl AnglePair {
    pub fn new(incidence: f64, m: &MaterialConfig) -> Result<Self> {
        let refraction = refraction_angle(incidence, m)?;
        Ok(Self::from_angles(incidence, refraction))
    }

    /// Builds a pair from explicit angles, e.g. for the index-matched limit.
    pub fn from_angles(incidence: f64, refraction: f64) -> Self {
        Self {
            incidence,
            refraction,
            alpha_plus: incidence + refraction,
            alpha_minus: incidence - refraction,
        }
    }
}

fn check_incidence(i: f64) -> Result<()> {
    if !(0.0..FRAC_PI_2).contains(&i) {
        return Err(Error::Domain {
            value: i,
            domain: "[0, pi/2)",
        });
    }
    Ok(())
}

pub fn refraction_angle(i: f64, m: &MaterialConfig) -> Result<f64> {
    check_incidence(i)?;
    Ok((i.sin() / m.k).asin())
}

fn nayar_dolp(i: f64, k: f64) -> f64 {
    let s2 = i.sin().powi(2);
    let num = (k - 1.0 / k).powi(2) * s2;
    let den = 2.0 + 2.0 * k * k - (k + 1.0 / k).powi(2) * s2 + 4.0 * i.cos() * (k * k - s2).sqrt();
    num / den
}

/// Diffuse DoLP as a function of incidence (Nayar model).
pub fn diffuse_dolp_forward(i: f64, m: &MaterialConfig) -> Result<f64> {
    check_incidence(i)?;
    Ok(nayar_dolp(i, m.k))
}

/// Closed-form inverse of [`diffuse_dolp_forward`].
pub fn incidence_from_dolp(d: f64, m: &MaterialConfig) -> Result<f64> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::Domain {
            value: d,
            domain: "DoLP >= 0",
        });
    }
    let saturated = || Error::Saturated { dolp: d, d_max: m.d_max };
    if d > m.d_max {
        return Err(saturated());
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    let k2 = m.k * m.k;
    let a = 2.0 * (1.0 - d) - (1.0 + d) * (k2 + 1.0 / k2);
    let b = 4.0 * d;
    let c = 1.0 + k2;
    let dd = 1.0 - k2;
    let disc = c * c * (a + b) * (a + b) - dd * dd * (a * a - b * b);
    if disc < 0.0 {
        return Err(saturated());
    }
    let sin2 = b * (-c * (a + b) + disc.sqrt()) / (2.0 * (a * a - b * b));
    if !sin2.is_finite() || sin2 < 0.0 {
        return Err(saturated());
    }
    let i = sin2.min(1.0).sqrt().asin();
    if i >= FRAC_PI_2 {
        return Err(saturated());
    }
    Ok(i)
}

/// Like [`incidence_from_dolp`], but on saturation retries once with DoLP
/// clamped to `d_max - 1e-6`. The flag reports whether the clamp was used.
pub fn incidence_from_dolp_clamped(d: f64, m: &MaterialConfig) -> Result<(f64, bool)> {
    match incidence_from_dolp(d, m) {
        Ok(i) => Ok((i, false)),
        Err(Error::Saturated { .. }) => {
            incidence_from_dolp(m.d_max - SATURATION_MARGIN, m).map(|i| (i, true))
        }
        Err(e) => Err(e),
    }
}

fn check_alpha(a: &AnglePair) -> Result<()> {
    if !(a.alpha_plus > ALPHA_EPS) {
        return Err(Error::Degenerate {
            alpha_plus: a.alpha_plus,
        });
    }
    Ok(())
}

/// Extrema (Imax, Imin) of the specular profile for total intensity `s0`.
pub fn fresnel_extrema_sp(s0: f64, a: &AnglePair) -> Result<(f64, f64)> {
    check_alpha(a)?;
    let ratio = (a.alpha_minus.tan() / a.alpha_plus.sin()).powi(2);
    let half = 0.5 * s0;
    Ok((
        half * ratio * a.alpha_minus.cos().powi(2),
        half * ratio * a.alpha_plus.cos().powi(2),
    ))
}

/// Extrema (Imax, Imin) of the diffuse profile for diffuse intensity `sd`.
pub fn fresnel_extrema_dp(sd: f64, a: &AnglePair) -> Result<(f64, f64)> {
    check_alpha(a)?;
    let t = (2.0 * a.incidence).sin() * (2.0 * a.refraction).sin()
        / (a.alpha_plus.sin() * a.alpha_minus.cos()).powi(2);
    let imax = 0.5 * sd * t;
    Ok((imax, imax * a.alpha_minus.cos().powi(2)))
}

/// [`fresnel_extrema_sp`] with the normal-incidence limit substituted for
/// degenerate angles.
pub fn fresnel_extrema_sp_or_limit(s0: f64, a: &AnglePair, m: &MaterialConfig) -> (f64, f64) {
    fresnel_extrema_sp(s0, a).unwrap_or_else(|_| {
        let v = 0.5 * s0 * m.normal_reflectance();
        (v, v)
    })
}

/// [`fresnel_extrema_dp`] with the normal-incidence transmittance
/// 1 - ((k - 1) / (k + 1))^2 substituted for degenerate angles.
pub fn fresnel_extrema_dp_or_limit(sd: f64, a: &AnglePair, m: &MaterialConfig) -> (f64, f64) {
    fresnel_extrema_dp(sd, a).unwrap_or_else(|_| {
        let v = 0.5 * sd * (1.0 - m.normal_reflectance());
        (v, v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn k15() -> MaterialConfig {
        MaterialConfig::new(1.5).unwrap()
    }

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn rejects_non_dielectric_index() {
        assert!(MaterialConfig::new(1.0).is_err());
        assert!(MaterialConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn snell_examples() {
        let m = k15();
        assert_eq!(refraction_angle(0.0, &m).unwrap(), 0.0);
        assert_abs_diff_eq!(refraction_angle(deg(30.0), &m).unwrap().to_degrees(), 19.471, epsilon = 1e-3);
        assert_abs_diff_eq!(refraction_angle(deg(80.0), &m).unwrap().to_degrees(), 41.03, epsilon = 1e-2);
        assert!(matches!(refraction_angle(FRAC_PI_2, &m), Err(Error::Domain { .. })));
        assert!(refraction_angle(-0.1, &m).is_err());
    }

    #[test]
    fn forward_model_values() {
        let m = k15();
        assert_eq!(diffuse_dolp_forward(0.0, &m).unwrap(), 0.0);
        // Independent evaluation of the same closed form in extended precision.
        assert_abs_diff_eq!(diffuse_dolp_forward(deg(45.0), &m).unwrap(), 0.043983162, epsilon = 1e-9);
        assert!(diffuse_dolp_forward(deg(75.0), &m).unwrap() > diffuse_dolp_forward(deg(45.0), &m).unwrap());
    }

    #[test]
    fn forward_model_is_increasing_to_85_degrees() {
        let m = k15();
        let mut prev = -1.0;
        for step in 0..=850 {
            let v = diffuse_dolp_forward(deg(step as f64 * 0.1), &m).unwrap();
            assert!(v > prev, "not increasing at {} deg", step as f64 * 0.1);
            prev = v;
        }
    }

    #[test]
    fn d_max_matches_grazing_limit() {
        for k in [1.3, 1.5, 1.8] {
            let m = MaterialConfig::new(k).unwrap();
            let analytic = (k - 1.0 / k) / (k + 1.0 / k);
            assert_abs_diff_eq!(m.d_max(), analytic, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(k15().d_max(), 0.384615, epsilon = 1e-6);
    }

    #[test]
    fn inversion_examples() {
        let m = k15();
        assert_eq!(incidence_from_dolp(0.0, &m).unwrap(), 0.0);
        for d in [45.0, 70.0] {
            let rho = diffuse_dolp_forward(deg(d), &m).unwrap();
            assert_abs_diff_eq!(incidence_from_dolp(rho, &m).unwrap(), deg(d), epsilon = 1e-6);
        }
    }

    #[test]
    fn saturation_and_clamp() {
        let m = k15();
        assert!(matches!(incidence_from_dolp(0.5, &m), Err(Error::Saturated { .. })));
        let (i, clamped) = incidence_from_dolp_clamped(0.5, &m).unwrap();
        assert!(clamped);
        assert!(i > deg(85.0) && i < FRAC_PI_2);
        let (_, clamped) = incidence_from_dolp_clamped(0.1, &m).unwrap();
        assert!(!clamped);
        assert!(matches!(incidence_from_dolp(-0.1, &m), Err(Error::Domain { .. })));
    }

    #[test]
    fn specular_extrema_examples() {
        assert_eq!(fresnel_extrema_sp(1.0, &AnglePair::from_angles(0.6, 0.6)).unwrap(), (0.0, 0.0));
        let brewster = AnglePair::from_angles(1.0, FRAC_PI_2 - 1.0);
        let (_, imin) = fresnel_extrema_sp(1.0, &brewster).unwrap();
        assert!(imin.abs() < 1e-30);
        let a = AnglePair::new(deg(45.0), &k15()).unwrap();
        assert_abs_diff_eq!(a.refraction.to_degrees(), 28.126, epsilon = 1e-3);
        let (imax, imin) = fresnel_extrema_sp(1.0, &a).unwrap();
        // Textbook Rs = sin^2(i-r)/sin^2(i+r), Rp = tan^2(i-r)/tan^2(i+r).
        let rs = (a.alpha_minus.sin() / a.alpha_plus.sin()).powi(2);
        let rp = (a.alpha_minus.tan() / a.alpha_plus.tan()).powi(2);
        assert_abs_diff_eq!(imax, 0.5 * rs, epsilon = 1e-15);
        assert_abs_diff_eq!(imin, 0.5 * rp, epsilon = 1e-15);
        assert!(imax > imin && imin > 0.0);
    }

    #[test]
    fn diffuse_extrema_examples() {
        let (imax, imin) = fresnel_extrema_dp(1.0, &AnglePair::from_angles(0.6, 0.6)).unwrap();
        assert_eq!(imax, imin);
        let a = AnglePair::new(deg(45.0), &k15()).unwrap();
        let (imax, imin) = fresnel_extrema_dp(1.0, &a).unwrap();
        assert!(imax > imin && imin > 0.0);
        assert_abs_diff_eq!(imin / imax, a.alpha_minus.cos().powi(2), epsilon = 1e-15);
        // Energy conservation against the reflected extrema.
        let (rs, rp) = fresnel_extrema_sp(1.0, &a).unwrap();
        assert_abs_diff_eq!(imax, 0.5 - rp, epsilon = 1e-15);
        assert_abs_diff_eq!(imin, 0.5 - rs, epsilon = 1e-15);
    }

    #[test]
    fn diffuse_extrema_reproduce_forward_dolp() {
        let m = k15();
        for d in [10.0, 30.0, 60.0, 80.0] {
            let a = AnglePair::new(deg(d), &m).unwrap();
            let (imax, imin) = fresnel_extrema_dp(1.0, &a).unwrap();
            assert_abs_diff_eq!(
                (imax - imin) / (imax + imin),
                diffuse_dolp_forward(deg(d), &m).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn degenerate_angles_and_limits() {
        let m = k15();
        let a = AnglePair::new(0.0, &m).unwrap();
        assert!(matches!(fresnel_extrema_sp(1.0, &a), Err(Error::Degenerate { .. })));
        assert!(matches!(fresnel_extrema_dp(1.0, &a), Err(Error::Degenerate { .. })));
        let (r0, r1) = fresnel_extrema_sp_or_limit(2.0, &a, &m);
        assert_abs_diff_eq!(r0, 0.04, epsilon = 1e-15);
        assert_eq!(r0, r1);
        let (t, _) = fresnel_extrema_dp_or_limit(2.0, &a, &m);
        assert_abs_diff_eq!(t, 4.0 * 1.5 / 2.5f64.powi(2), epsilon = 1e-15);
        // Limits agree with a slightly oblique evaluation.
        let near = AnglePair::new(1e-4, &m).unwrap();
        let (r, _) = fresnel_extrema_sp(2.0, &near).unwrap();
        assert_abs_diff_eq!(r, 0.04, epsilon = 1e-8);
    }

    proptest! {
        #[test]
        fn round_trip(i in 0.01f64..1.45, k in prop::sample::select(vec![1.3, 1.5, 1.8])) {
            let m = MaterialConfig::new(k).unwrap();
            let d = diffuse_dolp_forward(i, &m).unwrap();
            prop_assert!((incidence_from_dolp(d, &m).unwrap() - i).abs() < 1e-6);
        }

        #[test]
        fn extrema_are_ordered_and_homogeneous(i in 0.001f64..1.5, s in 0.0f64..10.0, c in 0.0f64..10.0) {
            let m = k15();
            let a = AnglePair::new(i, &m).unwrap();
            for f in [fresnel_extrema_sp, fresnel_extrema_dp] {
                let (hi, lo) = f(s, &a).unwrap();
                prop_assert!(hi >= lo && lo >= 0.0);
                let (hc, lc) = f(c * s, &a).unwrap();
                prop_assert!((hc - c * hi).abs() <= 1e-12 * (1.0 + hc.abs()));
                prop_assert!((lc - c * lo).abs() <= 1e-12 * (1.0 + lc.abs()));
            }
        }
    }
}
