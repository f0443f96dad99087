//! Windowed SSIM on valid (unpadded) window positions, with its analytic
//! gradient.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;
use crate::stats;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 1e-4;
pub const C2: f64 = 9e-4;

fn gaussian_1d() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (k, v) in g.iter_mut().enumerate() {
        let d = k as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-mode separable Gaussian filter of a `w x h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - WINDOW, h + 1 - WINDOW);
    let mut tmp = vec![0.0; h * ow];
    tmp.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        let line = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            *out = g.iter().zip(&line[x..x + WINDOW]).map(|(a, b)| a * b).sum();
        }
    });
    let mut out = vec![0.0; oh * ow];
    out.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = (0..WINDOW).map(|i| g[i] * tmp[(y + i) * ow + x]).sum();
        }
    });
    out
}

/// Adjoint of [`filter_valid`]: scatters a valid-sized map back to `w x h`.
fn filter_adjoint(src: &[f64], w: usize, h: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - WINDOW, h + 1 - WINDOW);
    let mut tmp = vec![0.0; h * ow];
    tmp.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        let lo = y.saturating_sub(oh - 1);
        let hi = y.min(WINDOW - 1);
        for (x, out) in row.iter_mut().enumerate() {
            *out = (lo..=hi).map(|i| g[i] * src[(y - i) * ow + x]).sum();
        }
    });
    let mut out = vec![0.0; h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let line = &tmp[y * ow..(y + 1) * ow];
        for (x, o) in row.iter_mut().enumerate() {
            let lo = x.saturating_sub(ow - 1);
            let hi = x.min(WINDOW - 1);
            *o = (lo..=hi).map(|j| g[j] * line[x - j]).sum();
        }
    });
    out
}

/// Mean SSIM of one channel plane and, optionally, its gradient in `x`.
fn ssim_plane(x: &[f64], y: &[f64], w: usize, h: usize, grad: bool) -> (f64, Option<Vec<f64>>) {
    let g = gaussian_1d();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter_valid(x, w, h, &g);
    let my = filter_valid(y, w, h, &g);
    let exx = filter_valid(&sq(x, x), w, h, &g);
    let eyy = filter_valid(&sq(y, y), w, h, &g);
    let exy = filter_valid(&sq(x, y), w, h, &g);
    let n = mx.len();
    let mut s = vec![0.0; n];
    let mut alpha = vec![0.0; if grad { n } else { 0 }];
    let mut beta = alpha.clone();
    let mut gamma = alpha.clone();
    for p in 0..n {
        let (ux, uy) = (mx[p], my[p]);
        let a1 = 2.0 * ux * uy + C1;
        let a2 = 2.0 * (exy[p] - ux * uy) + C2;
        let b1 = ux * ux + uy * uy + C1;
        let b2 = (exx[p] - ux * ux) + (eyy[p] - uy * uy) + C2;
        let v = a1 * a2 / (b1 * b2);
        s[p] = v;
        if grad {
            alpha[p] = v * (2.0 * uy / a1 - 2.0 * uy / a2 - 2.0 * ux / b1 + 2.0 * ux / b2);
            beta[p] = 2.0 * v / a2;
            gamma[p] = -2.0 * v / b2;
        }
    }
    let mean = stats::mean(&s);
    if !grad {
        return (mean, None);
    }
    let fa = filter_adjoint(&alpha, w, h, &g);
    let fb = filter_adjoint(&beta, w, h, &g);
    let fc = filter_adjoint(&gamma, w, h, &g);
    let scale = 1.0 / n as f64;
    let dx = (0..w * h).map(|k| scale * (fa[k] + fb[k] * y[k] + fc[k] * x[k])).collect();
    (mean, Some(dx))
}

fn check(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    a.ensure_same_dims(b, "dssim")?;
    if a.width() < WINDOW || a.height() < WINDOW {
        return Err(Error::WindowTooLarge {
            width: a.width(),
            height: a.height(),
            window: WINDOW,
        });
    }
    Ok(())
}

fn plane(img: &ImageBuffer, c: usize) -> Vec<f64> {
    img.data().iter().skip(c).step_by(img.channels()).copied().collect()
}

/// Mean SSIM over channels, and optionally the gradient of the mean SSIM
/// with respect to `a` (interleaved like `a`).
pub(crate) fn mean_ssim(a: &ImageBuffer, b: &ImageBuffer, grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    check(a, b)?;
    if a.data() == b.data() {
        // SSIM attains its maximum 1 exactly; the stationary gradient is zero.
        return Ok((1.0, grad.then(|| vec![0.0; a.data().len()])));
    }
    let (w, h, ch) = a.dims();
    let mut values = Vec::with_capacity(ch);
    let mut g = grad.then(|| vec![0.0; a.data().len()]);
    for c in 0..ch {
        let (v, dx) = ssim_plane(&plane(a, c), &plane(b, c), w, h, grad);
        values.push(v);
        if let (Some(g), Some(dx)) = (g.as_mut(), dx) {
            for (k, d) in dx.into_iter().enumerate() {
                g[k * ch + c] = d / ch as f64;
            }
        }
    }
    Ok((stats::mean(&values), g))
}

/// `(1 - SSIM) / 2` with an 11x11 Gaussian window (sigma 1.5) evaluated at
/// every position where the window fits inside the image.
pub fn dssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    Ok(0.5 * (1.0 - mean_ssim(a, b, false)?.0))
}

/// D-SSIM and its gradient with respect to `a`.
pub fn dssim_with_grad(a: &ImageBuffer, b: &ImageBuffer) -> Result<(f64, Vec<f64>)> {
    let (s, g) = mean_ssim(a, b, true)?;
    let g = g.expect("gradient requested").into_iter().map(|v| -0.5 * v).collect();
    Ok((0.5 * (1.0 - s), g))
}
