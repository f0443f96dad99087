//! Polarization filter array mosaics: simulation and bilinear demosaicing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::buffer::{ImageBuffer, PolarStack};
use crate::error::{Error, Result};

/// Polarizer orientation of one photosite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarAngle {
    #[serde(rename = "0")]
    Deg0,
    #[serde(rename = "45")]
    Deg45,
    #[serde(rename = "90")]
    Deg90,
    #[serde(rename = "135")]
    Deg135,
}

impl PolarAngle {
    pub const ALL: [PolarAngle; 4] = [PolarAngle::Deg0, PolarAngle::Deg45, PolarAngle::Deg90, PolarAngle::Deg135];

    fn index(self) -> usize {
        match self {
            PolarAngle::Deg0 => 0,
            PolarAngle::Deg45 => 1,
            PolarAngle::Deg90 => 2,
            PolarAngle::Deg135 => 3,
        }
    }

    pub fn from_degrees(deg: u32) -> Option<Self> {
        match deg {
            0 => Some(PolarAngle::Deg0),
            45 => Some(PolarAngle::Deg45),
            90 => Some(PolarAngle::Deg90),
            135 => Some(PolarAngle::Deg135),
            _ => None,
        }
    }
}

/// Angle arrangement of a 2x2 superpixel in order top-left, top-right,
/// bottom-left, bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct MosaicLayout([PolarAngle; 4]);

impl MosaicLayout {
    pub fn new(cells: [PolarAngle; 4]) -> Result<Self> {
        let mut seen = [false; 4];
        for c in cells {
            seen[c.index()] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(format!(
                "mosaic layout must use each angle once, got {cells:?}"
            )));
        }
        Ok(Self(cells))
    }

    pub fn cells(&self) -> [PolarAngle; 4] {
        self.0
    }

    /// Offset (dx, dy) of `angle` inside the superpixel.
    pub fn offset(&self, angle: PolarAngle) -> (usize, usize) {
        let pos = self.0.iter().position(|&c| c == angle).expect("layout is a permutation");
        (pos % 2, pos / 2)
    }
}

impl Default for MosaicLayout {
    fn default() -> Self {
        Self([PolarAngle::Deg90, PolarAngle::Deg45, PolarAngle::Deg135, PolarAngle::Deg0])
    }
}

impl TryFrom<[u32; 4]> for MosaicLayout {
    type Error = Error;

    fn try_from(deg: [u32; 4]) -> Result<Self> {
        let mut cells = [PolarAngle::Deg0; 4];
        for (c, d) in cells.iter_mut().zip(deg) {
            *c = PolarAngle::from_degrees(d)
                .ok_or_else(|| Error::Config(format!("unsupported polarizer angle {d}")))?;
        }
        Self::new(cells)
    }
}

impl From<MosaicLayout> for [u32; 4] {
    fn from(layout: MosaicLayout) -> Self {
        layout.0.map(|c| [0, 45, 90, 135][c.index()])
    }
}

/// Single-channel sensor readout behind a polarization filter array.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMosaic {
    width: usize,
    height: usize,
    data: Vec<f64>,
    layout: MosaicLayout,
}

impl RawMosaic {
    pub fn new(width: usize, height: usize, data: Vec<f64>, layout: MosaicLayout) -> Result<Self> {
        if !width.is_multiple_of(2) || !height.is_multiple_of(2) || width == 0 || height == 0 {
            return Err(Error::OddMosaic { width, height });
        }
        // Reuses the image validation for length and sign.
        let data = ImageBuffer::new(width, height, 1, data)?.into_data();
        Ok(Self {
            width,
            height,
            data,
            layout,
        })
    }

    pub fn from_image(img: &ImageBuffer, layout: MosaicLayout) -> Result<Self> {
        Self::new(img.width(), img.height(), img.luminance().into_data(), layout)
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

    pub fn layout(&self) -> MosaicLayout {
        self.layout
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Samples each photosite from the stack channel of its filter angle.
/// Multi-channel stacks are reduced to luminance first.
pub fn mosaic(stack: &PolarStack, layout: MosaicLayout) -> Result<RawMosaic> {
    let (w, h) = (stack.width(), stack.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::OddMosaic { width: w, height: h });
    }
    let lum = stack.channels_by_angle().map(|c| c.luminance());
    let cells = layout.cells();
    let data = (0..w * h)
        .map(|idx| {
            let (x, y) = (idx % w, idx / w);
            let angle = cells[(y % 2) * 2 + x % 2];
            lum[angle.index()].data()[idx]
        })
        .collect();
    RawMosaic::new(w, h, data, layout)
}

/// Grid coordinate for full-resolution index `p` on the sample lattice
/// `offset + 2k`, clamped to the lattice. Returns (k0, k1, t).
fn lattice(p: usize, offset: usize, n: usize) -> (usize, usize, f64) {
    if p <= offset {
        return (0, 0, 0.0);
    }
    let k0 = (p - offset) / 2;
    if k0 + 1 >= n {
        return (n - 1, n - 1, 0.0);
    }
    let t = if (p - offset).is_multiple_of(2) { 0.0 } else { 0.5 };
    (k0, k0 + 1, t)
}

fn interpolate_channel(raw: &RawMosaic, angle: PolarAngle) -> ImageBuffer {
    let (w, h) = (raw.width, raw.height);
    let (gw, gh) = (w / 2, h / 2);
    let (ox, oy) = raw.layout.offset(angle);
    let sample = |gx: usize, gy: usize| raw.get(ox + 2 * gx, oy + 2 * gy);
    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let (y0, y1, ty) = lattice(y, oy, gh);
        for (x, out) in row.iter_mut().enumerate() {
            let (x0, x1, tx) = lattice(x, ox, gw);
            let top = sample(x0, y0) + (sample(x1, y0) - sample(x0, y0)) * tx;
            let bottom = sample(x0, y1) + (sample(x1, y1) - sample(x0, y1)) * tx;
            *out = top + (bottom - top) * ty;
        }
    });
    ImageBuffer::new(w, h, 1, data).expect("convex combination of valid samples")
}

/// Bilinear demosaic of each angle channel from its quarter-resolution grid.
/// Sample sites reproduce the raw value exactly; borders clamp to the nearest
/// sample row or column.
pub fn demosaic(raw: &RawMosaic) -> PolarStack {
    let [i0, i45, i90, i135] = PolarAngle::ALL.map(|a| interpolate_channel(raw, a));
    PolarStack { i0, i45, i90, i135 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_0_45_90_135() -> MosaicLayout {
        MosaicLayout::new(PolarAngle::ALL).unwrap()
    }

    #[test]
    fn odd_dimensions_are_rejected() {
        let err = RawMosaic::new(3, 2, vec![0.0; 6], MosaicLayout::default()).unwrap_err();
        assert!(matches!(err, Error::OddMosaic { width: 3, height: 2 }));
    }

    #[test]
    fn constant_mosaic_gives_constant_channels() {
        let raw = RawMosaic::new(6, 4, vec![0.37; 24], MosaicLayout::default()).unwrap();
        let stack = demosaic(&raw);
        for ch in stack.channels_by_angle() {
            assert!(ch.data().iter().all(|&v| v == 0.37));
        }
    }

    #[test]
    fn single_superpixel_sample_site() {
        let raw = RawMosaic::new(2, 2, vec![1.0, 0.0, 0.0, 0.0], layout_0_45_90_135()).unwrap();
        let stack = demosaic(&raw);
        assert_eq!(stack.i0.get(0, 0, 0), 1.0);
        assert_eq!(stack.i45.get(1, 0, 0), 0.0);
    }

    #[test]
    fn linear_ramp_is_reproduced_in_the_interior() {
        let (w, h) = (16, 12);
        let ramp = |x: usize, y: usize| 0.1 + 0.013 * x as f64 + 0.007 * y as f64;
        let data = (0..w * h).map(|i| ramp(i % w, i / w)).collect();
        let raw = RawMosaic::new(w, h, data, MosaicLayout::default()).unwrap();
        let stack = demosaic(&raw);
        for ch in stack.channels_by_angle() {
            for y in 2..h - 2 {
                for x in 2..w - 2 {
                    assert!((ch.get(x, y, 0) - ramp(x, y)).abs() < 1e-6, "({x}, {y})");
                }
            }
        }
    }

    #[test]
    fn default_layout_offsets() {
        let l = MosaicLayout::default();
        assert_eq!(l.offset(PolarAngle::Deg90), (0, 0));
        assert_eq!(l.offset(PolarAngle::Deg45), (1, 0));
        assert_eq!(l.offset(PolarAngle::Deg135), (0, 1));
        assert_eq!(l.offset(PolarAngle::Deg0), (1, 1));
    }

    #[test]
    fn layout_must_be_a_permutation() {
        assert!(MosaicLayout::try_from([0, 0, 90, 135]).is_err());
        assert!(MosaicLayout::try_from([0, 30, 90, 135]).is_err());
        let l = MosaicLayout::try_from([90, 45, 135, 0]).unwrap();
        assert_eq!(l, MosaicLayout::default());
        assert_eq!(<[u32; 4]>::from(l), [90, 45, 135, 0]);
    }

    #[test]
    fn mosaic_then_demosaic_keeps_sample_sites() {
        let (w, h) = (8, 6);
        let mk = |s: f64| ImageBuffer::from_fn(w, h, |x, y| s * (x * 3 + y * 5) as f64 % 1.0).unwrap();
        let stack = PolarStack::new(mk(0.11), mk(0.23), mk(0.37), mk(0.41)).unwrap();
        let raw = mosaic(&stack, MosaicLayout::default()).unwrap();
        let back = demosaic(&raw);
        for (angle, ch) in PolarAngle::ALL.iter().zip(back.channels_by_angle()) {
            let (ox, oy) = raw.layout().offset(*angle);
            for y in (oy..h).step_by(2) {
                for x in (ox..w).step_by(2) {
                    assert_eq!(ch.get(x, y, 0).to_bits(), raw.get(x, y).to_bits());
                }
            }
        }
    }
}
