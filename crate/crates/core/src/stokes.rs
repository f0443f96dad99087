//! Linear Stokes parameters, DoLP and AoLP from four polarizer captures.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::imaging::{Mask, PolarStack, ScalarMap};

/// DoLP ceiling; the incidence inversion is singular as DoLP approaches 1.
pub const DOLP_CEILING: f64 = 1.0 - 1e-3;
/// Pixels with S0 below this are treated as unpolarized.
pub const S0_FLOOR: f64 = 1e-6;

/// Per-pixel (S0, S1, S2). S3 is not represented.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesMap {
    width: usize,
    height: usize,
    pub s0: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
}

impl StokesMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, idx: usize) -> (f64, f64, f64) {
        (self.s0[idx], self.s1[idx], self.s2[idx])
    }

    pub fn s0_map(&self) -> ScalarMap {
        ScalarMap::new(self.width, self.height, self.s0.clone()).expect("finite")
    }

    pub fn s1_map(&self) -> ScalarMap {
        ScalarMap::new(self.width, self.height, self.s1.clone()).expect("finite")
    }

    pub fn s2_map(&self) -> ScalarMap {
        ScalarMap::new(self.width, self.height, self.s2.clone()).expect("finite")
    }
}

/// AoLP in radians on (-pi/2, pi/2], with pixels where S1 = S2 = 0 flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMap {
    pub angles: ScalarMap,
    pub low_confidence: Mask,
}

/// Multi-channel stacks are reduced to their channel-mean luminance first.
pub fn compute_stokes(stack: &PolarStack) -> StokesMap {
    let [i0, i45, i90, i135] = stack.channels_by_angle().map(|c| c.luminance().into_data());
    let n = i0.len();
    let mut s0 = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    s0.par_iter_mut()
        .zip(s1.par_iter_mut())
        .zip(s2.par_iter_mut())
        .enumerate()
        .for_each(|(k, ((a, b), c))| {
            *a = 0.5 * (i0[k] + i45[k] + i90[k] + i135[k]);
            *b = i0[k] - i90[k];
            *c = i45[k] - i135[k];
        });
    StokesMap {
        width: stack.width(),
        height: stack.height(),
        s0,
        s1,
        s2,
    }
}

pub fn dolp_pixel(s0: f64, s1: f64, s2: f64) -> f64 {
    if s0 < S0_FLOOR {
        return 0.0;
    }
    (s1.hypot(s2) / s0).clamp(0.0, DOLP_CEILING)
}

/// `None` marks the undefined angle at S1 = S2 = 0.
pub fn aolp_pixel(s1: f64, s2: f64) -> Option<f64> {
    if s1 == 0.0 && s2 == 0.0 {
        return None;
    }
    let mut a = 0.5 * s2.atan2(s1);
    if a <= -FRAC_PI_2 {
        a += PI;
    }
    Some(a)
}

pub fn compute_dolp(s: &StokesMap) -> ScalarMap {
    let data = (0..s.s0.len())
        .into_par_iter()
        .map(|k| dolp_pixel(s.s0[k], s.s1[k], s.s2[k]))
        .collect();
    ScalarMap::new(s.width, s.height, data).expect("clamped DoLP is finite")
}

pub fn compute_aolp(s: &StokesMap) -> AngleMap {
    let (angles, flags): (Vec<f64>, Vec<bool>) = (0..s.s0.len())
        .into_par_iter()
        .map(|k| match aolp_pixel(s.s1[k], s.s2[k]) {
            Some(a) => (a, false),
            None => (0.0, true),
        })
        .unzip();
    AngleMap {
        angles: ScalarMap::new(s.width, s.height, angles).expect("finite angles"),
        low_confidence: Mask::new(s.width, s.height, flags).expect("matching size"),
    }
}
