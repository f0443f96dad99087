//! Row-major image containers shared by every stage of the pipeline.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Linear, non-negative intensities with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidImage(format!(
                "intensities must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(value.is_finite() && value >= 0.0);
        assert!(channels == 1 || channels == 3);
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds a single-channel buffer from a per-pixel function of (x, y).
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Self> {
        let mut data = vec![0.0; width * height];
        data.par_chunks_mut(width.max(1))
            .enumerate()
            .for_each(|(y, row)| {
                for (x, v) in row.iter_mut().enumerate() {
                    *v = f(x, y);
                }
            });
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Mutable access for in-place optimisers. Callers restore the
    /// non-negativity invariant with [`ImageBuffer::clamp_min`] afterwards.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn clamp_min(&mut self, lo: f64) {
        for v in &mut self.data {
            *v = v.max(lo);
        }
    }

    /// Per-pixel channel mean; a no-op copy for single-channel buffers.
    pub fn luminance(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let c = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn scaled(&self, factor: f64) -> ImageBuffer {
        assert!(factor.is_finite() && factor >= 0.0);
        ImageBuffer {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn ensure_same_dims(&self, other: &ImageBuffer, context: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                context: context.to_string(),
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// Per-pixel real values of unrestricted sign (Stokes components, DoLP, angles).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "scalar map length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("scalar map contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, 1)
    }

    /// Reinterprets the map as a single-channel image; fails on negative values.
    pub fn to_image(&self) -> Result<ImageBuffer> {
        ImageBuffer::new(self.width, self.height, 1, self.data.clone())
    }
}

/// Per-pixel boolean flags (validity, degeneracy, foreground).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Four co-registered captures behind a linear polarizer at 0, 45, 90 and 135 degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarStack {
    pub i0: ImageBuffer,
    pub i45: ImageBuffer,
    pub i90: ImageBuffer,
    pub i135: ImageBuffer,
}

impl PolarStack {
    pub fn new(i0: ImageBuffer, i45: ImageBuffer, i90: ImageBuffer, i135: ImageBuffer) -> Result<Self> {
        for (name, img) in [("i45", &i45), ("i90", &i90), ("i135", &i135)] {
            i0.ensure_same_dims(img, name)?;
        }
        Ok(Self { i0, i45, i90, i135 })
    }

    pub fn width(&self) -> usize {
        self.i0.width()
    }

    pub fn height(&self) -> usize {
        self.i0.height()
    }

    pub fn channels(&self) -> usize {
        self.i0.channels()
    }

    /// Channels in angle order 0, 45, 90, 135.
    pub fn channels_by_angle(&self) -> [&ImageBuffer; 4] {
        [&self.i0, &self.i45, &self.i90, &self.i135]
    }

    pub fn scaled(&self, factor: f64) -> PolarStack {
        PolarStack {
            i0: self.i0.scaled(factor),
            i45: self.i45.scaled(factor),
            i90: self.i90.scaled(factor),
            i135: self.i135.scaled(factor),
        }
    }
}

/// Unit normals in camera coordinates (+z toward the camera) with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    normals: Vec<[f64; 3]>,
    valid: Vec<bool>,
}


impl NormalMap {
    /// Valid pixels are renormalised; pixels flagged invalid are zeroed.
    pub fn new(width: usize, height: usize, normals: Vec<[f64; 3]>, valid: Vec<bool>) -> Result<Self> {
        if normals.len() != width * height || valid.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "normal map buffers do not match {width}x{height}"
            )));
        }
        let mut normals = normals;
        for (n, &ok) in normals.iter_mut().zip(&valid) {
            if !ok {
                *n = [0.0; 3];
                continue;
            }
            let len = norm(n);
            if !len.is_finite() || len == 0.0 {
                return Err(Error::InvalidImage("valid normal with zero or non-finite length".into()));
            }
            *n = [n[0] / len, n[1] / len, n[2] / len];
        }
        Ok(Self {
            width,
            height,
            normals,
            valid,
        })
    }

    /// Pixels whose vector has (near) zero length are treated as invalid.
    pub fn from_vectors(width: usize, height: usize, normals: Vec<[f64; 3]>) -> Result<Self> {
        let valid = normals.iter().map(|n| norm(n) > 1e-9).collect();
        Self::new(width, height, normals, valid)
    }

    pub fn uniform(width: usize, height: usize, n: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![n; width * height], vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, 3)
    }

    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<[f64; 3]> {
        let idx = y * self.width + x;
        self.valid[idx].then(|| self.normals[idx])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn validity_mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.valid.clone(),
        }
    }

    pub(crate) fn normals_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.normals
    }

    /// Restores unit length on valid pixels after an in-place update.
    pub(crate) fn renormalize(&mut self) {
        for (n, &ok) in self.normals.iter_mut().zip(&self.valid) {
            if ok {
                let len = norm(n);
                if len > 0.0 && len.is_finite() {
                    *n = [n[0] / len, n[1] / len, n[2] / len];
                } else {
                    *n = [0.0, 0.0, 1.0];
                }
            }
        }
    }

    pub fn ensure_same_size(&self, width: usize, height: usize, context: &str) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(Error::DimensionMismatch {
                context: context.to_string(),
                expected: (width, height, 3),
                found: self.dims(),
            });
        }
        Ok(())
    }
}

pub(crate) fn norm(n: &[f64; 3]) -> f64 {
    (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn ensure_size(
    (w, h): (usize, usize),
    other: (usize, usize, usize),
    context: &str,
) -> Result<()> {
    if (w, h) != (other.0, other.1) {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected: (w, h, other.2),
            found: other,
        });
    }
    Ok(())
}
