//! Reductions with a fixed summation order, and image comparison metrics.

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise summation; the result depends only on the slice contents.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= PAIRWISE_BLOCK {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    pairwise_sum(v) / v.len() as f64
}

/// Median of the finite values; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Pearson correlation over the entries where `mask` is true (all entries
/// when `mask` is `None`). A constant input has no defined correlation and
/// yields 0.
pub fn pearson(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    assert_eq!(a.len(), b.len());
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .enumerate()
        .filter(|(k, _)| mask.is_none_or(|m| m[*k]))
        .map(|(_, (x, y))| (*x, *y))
        .unzip();
    if xs.len() < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(&xs), mean(&ys));
    let dx: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let dy: Vec<f64> = ys.iter().map(|y| y - my).collect();
    let sxy = pairwise_sum(&dx.iter().zip(&dy).map(|(p, q)| p * q).collect::<Vec<_>>());
    let sxx = pairwise_sum(&dx.iter().map(|p| p * p).collect::<Vec<_>>());
    let syy = pairwise_sum(&dy.iter().map(|q| q * q).collect::<Vec<_>>());
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Peak signal-to-noise ratio in dB for unit peak; infinite for identical inputs.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_dims(b, "psnr")?;
    if a.data().is_empty() {
        return Err(Error::InvalidImage("psnr of an empty image".into()));
    }
    let sq: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(-10.0 * mean(&sq).log10())
}
