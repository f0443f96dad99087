//! Specular/diffuse separation from Stokes data and Fresnel extrema.
//!
//! The diffuse Stokes magnitude is approximated as S0 minus the specular
//! magnitude; the residual of that approximation is absorbed by rescaling the
//! pair so that it sums to S0 / 2 at every pixel.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::fresnel::{self, AnglePair, MaterialConfig};
use crate::imaging::{ImageBuffer, Mask, PolarStack};
use crate::stokes::{self, StokesMap};

/// DoLP below which the inversion is not attempted.
pub const DOLP_EPS: f64 = 1e-4;

/// Single-channel specular and diffuse images plus per-pixel fallback flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPair {
    pub i_sp: ImageBuffer,
    pub i_dp: ImageBuffer,
    pub degenerate_mask: Mask,
}

/// `(Imax + Imin)/2 + (Imax - Imin)/2 * cos(2 theta)`.
pub fn specular_profile((imax, imin): (f64, f64), theta: f64) -> f64 {
    0.5 * (imax + imin) + 0.5 * (imax - imin) * (2.0 * theta).cos()
}

/// The specular profile shifted by pi/2.
pub fn diffuse_profile((imax, imin): (f64, f64), theta: f64) -> f64 {
    0.5 * (imax + imin) + 0.5 * (imax - imin) * (2.0 * (theta - FRAC_PI_2)).cos()
}

/// Splits `half` into two non-negative parts in proportion `sp : dp` such
/// that the floating-point sum of the parts is exactly `half`.
fn fuse(sp: f64, dp: f64, half: f64) -> (f64, f64) {
    let total = sp + dp;
    if !(total > 0.0) {
        return (0.0, half);
    }
    let a = (half * (sp / total)).clamp(0.0, half);
    if a >= 0.5 * half {
        (a, half - a)
    } else {
        let b = half - a;
        (half - b, b)
    }
}

/// Returns `(i_sp, i_dp)` for one pixel, or `None` when it falls back.
fn separate_pixel(s0: f64, dolp: f64, m: &MaterialConfig) -> Option<(f64, f64)> {
    if dolp < DOLP_EPS {
        return None;
    }
    let (i, _) = fresnel::incidence_from_dolp_clamped(dolp, m).ok()?;
    let angles = AnglePair::new(i, m).ok()?;
    let (sp_max, sp_min) = fresnel::fresnel_extrema_sp(s0, &angles).ok()?;
    let s_sp = sp_max + sp_min;
    let sd = (s0 - s_sp).max(0.0);
    let (dp_max, dp_min) = fresnel::fresnel_extrema_dp(sd, &angles).ok()?;
    let sp = 0.5 * (sp_max + sp_min);
    let dp = 0.5 * (dp_max + dp_min);
    Some(fuse(sp, dp, 0.5 * s0))
}

pub fn separate_stokes(s: &StokesMap, m: &MaterialConfig) -> ReflectionPair {
    let (w, h) = (s.width(), s.height());
    let rows: Vec<(f64, f64, bool)> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let (s0, s1, s2) = s.get(k);
            let dolp = stokes::dolp_pixel(s0, s1, s2);
            match separate_pixel(s0, dolp, m) {
                Some((sp, dp)) => (sp, dp, false),
                None => (0.0, 0.5 * s0.max(0.0), true),
            }
        })
        .collect();
    let mut sp = Vec::with_capacity(w * h);
    let mut dp = Vec::with_capacity(w * h);
    let mut flags = Vec::with_capacity(w * h);
    for (a, b, f) in rows {
        sp.push(a);
        dp.push(b);
        flags.push(f);
    }
    ReflectionPair {
        i_sp: ImageBuffer::new(w, h, 1, sp).expect("non-negative by construction"),
        i_dp: ImageBuffer::new(w, h, 1, dp).expect("non-negative by construction"),
        degenerate_mask: Mask::new(w, h, flags).expect("matching size"),
    }
}

/// Multi-channel stacks are separated on their luminance.
pub fn separate(stack: &PolarStack, m: &MaterialConfig) -> ReflectionPair {
    separate_stokes(&stokes::compute_stokes(stack), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    use proptest::prelude::*;

    #[test]
    fn profile_examples() {
        let e = (0.8, 0.2);
        assert_eq!(specular_profile(e, 0.0), 0.8);
        assert!((specular_profile(e, FRAC_PI_2) - 0.2).abs() < 1e-15);
        assert!((specular_profile(e, FRAC_PI_4) - 0.5).abs() < 1e-15);
        assert_eq!(diffuse_profile(e, FRAC_PI_2), 0.8);
        assert!((diffuse_profile(e, 0.0) - 0.2).abs() < 1e-15);
        assert!((diffuse_profile(e, FRAC_PI_4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_dolp_falls_back() {
        let img = ImageBuffer::filled(2, 2, 1, 0.4);
        let stack = PolarStack::new(img.clone(), img.clone(), img.clone(), img).unwrap();
        let pair = separate(&stack, &MaterialConfig::default());
        assert!(pair.i_sp.data().iter().all(|&v| v == 0.0));
        assert!(pair.i_dp.data().iter().all(|&v| v == 0.4));
        assert_eq!(pair.degenerate_mask.count(), 4);
    }

    fn stack_of(v: [f64; 4]) -> PolarStack {
        let [a, b, c, d] = v.map(|x| ImageBuffer::filled(1, 1, 1, x));
        PolarStack::new(a, b, c, d).unwrap()
    }

    proptest! {
        #[test]
        fn fusion_closure_and_non_negativity(v in prop::array::uniform4(0.0f64..1.0)) {
            let s = stokes::compute_stokes(&stack_of(v));
            let pair = separate_stokes(&s, &MaterialConfig::default());
            let (sp, dp) = (pair.i_sp.data()[0], pair.i_dp.data()[0]);
            prop_assert!(sp >= 0.0 && dp >= 0.0);
            prop_assert_eq!(sp + dp, 0.5 * s.s0[0]);
        }

        #[test]
        fn scale_equivariance(v in prop::array::uniform4(0.05f64..1.0), c in 0.1f64..10.0) {
            let m = MaterialConfig::default();
            let a = separate(&stack_of(v), &m);
            let b = separate(&stack_of(v.map(|x| x * c)), &m);
            prop_assert_eq!(a.degenerate_mask.data(), b.degenerate_mask.data());
            let tol = 1e-12 * c.max(1.0);
            prop_assert!((b.i_sp.data()[0] - c * a.i_sp.data()[0]).abs() < tol);
            prop_assert!((b.i_dp.data()[0] - c * a.i_dp.data()[0]).abs() < tol);
        }

        #[test]
        fn fuse_is_exact(sp in 0.0f64..10.0, dp in 0.0f64..10.0, half in 0.0f64..10.0) {
            let (a, b) = fuse(sp, dp, half);
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert_eq!(a + b, half);
        }
    }
}
