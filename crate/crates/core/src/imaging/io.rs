//! File I/O for intensity images, scalar maps and normal maps.
//!
//! Integer PNGs are linearised by plain division by the type maximum. Float
//! maps go through PFM.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageReader, Luma, Rgb};

use super::buffer::{ImageBuffer, Mask, NormalMap, PolarStack, ScalarMap};
use super::pfm::{self, FloatRaster};
use crate::error::{Error, Result};

fn is_pfm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Loads any supported image as raw floats (no sign check).
pub fn load_raster(path: &Path) -> Result<FloatRaster> {
    if is_pfm(path) {
        return pfm::read(path);
    }
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::decode(path, e.to_string()))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    let channels = if color.has_color() { 3 } else { 1 };
    let data: Vec<f32> = match (color.bytes_per_pixel() / color.channel_count(), channels) {
        (1, 1) => img.to_luma8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        (1, 3) => img.to_rgb8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        (2, 1) => img.to_luma16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        (2, 3) => img.to_rgb16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        (_, 1) => img.to_rgb32f().into_raw().chunks_exact(3).map(|p| p[0]).collect(),
        _ => img.to_rgb32f().into_raw(),
    };
    Ok(FloatRaster {
        width,
        height,
        channels,
        data,
    })
}

pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let r = load_raster(path)?;
    ImageBuffer::new(r.width, r.height, r.channels, r.data.iter().map(|&v| v as f64).collect())
        .map_err(|e| Error::decode(path, e.to_string()))
}

pub fn load_scalar_map(path: &Path) -> Result<ScalarMap> {
    let r = load_raster(path)?;
    let data: Vec<f64> = if r.channels == 1 {
        r.data.iter().map(|&v| v as f64).collect()
    } else {
        r.data
            .chunks_exact(r.channels)
            .map(|p| p.iter().map(|&v| v as f64).sum::<f64>() / r.channels as f64)
            .collect()
    };
    ScalarMap::new(r.width, r.height, data).map_err(|e| Error::decode(path, e.to_string()))
}

/// Reads a 3-channel PFM of raw normal vectors; zero vectors are invalid pixels.
pub fn load_normal_map(path: &Path) -> Result<NormalMap> {
    let r = load_raster(path)?;
    if r.channels != 3 {
        return Err(Error::decode(path, "normal maps must have 3 channels"));
    }
    let normals = r
        .data
        .chunks_exact(3)
        .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
        .collect();
    NormalMap::from_vectors(r.width, r.height, normals).map_err(|e| Error::decode(path, e.to_string()))
}

/// Loads four captures in angle order 0, 45, 90, 135.
pub fn load_polar_stack(paths: [&Path; 4]) -> Result<PolarStack> {
    let first = load_image(paths[0])?;
    let expected = first.dims();
    let mut rest = Vec::with_capacity(3);
    for path in &paths[1..] {
        let img = load_image(path)?;
        if img.dims() != expected {
            return Err(Error::FileDimensionMismatch {
                path: PathBuf::from(path),
                expected,
                found: img.dims(),
            });
        }
        rest.push(img);
    }
    let mut rest = rest.into_iter();
    let (a, b, c) = (rest.next().unwrap(), rest.next().unwrap(), rest.next().unwrap());
    PolarStack::new(first, a, b, c)
}

pub fn save_image_pfm(path: &Path, img: &ImageBuffer) -> Result<()> {
    pfm::write(
        path,
        &FloatRaster {
            width: img.width(),
            height: img.height(),
            channels: img.channels(),
            data: img.data().iter().map(|&v| v as f32).collect(),
        },
    )
}

pub fn save_scalar_pfm(path: &Path, map: &ScalarMap) -> Result<()> {
    pfm::write(
        path,
        &FloatRaster {
            width: map.width(),
            height: map.height(),
            channels: 1,
            data: map.data().iter().map(|&v| v as f32).collect(),
        },
    )
}

/// Raw normal vectors; invalid pixels are written as (0, 0, 0).
pub fn save_normal_pfm(path: &Path, map: &NormalMap) -> Result<()> {
    pfm::write(
        path,
        &FloatRaster {
            width: map.width(),
            height: map.height(),
            channels: 3,
            data: map.normals().iter().flatten().map(|&v| v as f32).collect(),
        },
    )
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// 16-bit preview; values are clamped to [0, 1].
pub fn save_png16(path: &Path, img: &ImageBuffer) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u16> = img.data().iter().map(|&v| quantize16(v)).collect();
    let dynimg = if img.channels() == 1 {
        DynamicImage::ImageLuma16(image::ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).unwrap())
    } else {
        DynamicImage::ImageRgb16(image::ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).unwrap())
    };
    dynimg
        .save(path)
        .map_err(|e| Error::decode(path, e.to_string()))
}

pub fn save_mask_png(path: &Path, mask: &Mask) -> Result<()> {
    let raw: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    image::ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .unwrap()
        .save(path)
        .map_err(|e| Error::decode(path, e.to_string()))
}

/// Maps `value` in `[lo, hi]` onto a blue-to-red ramp.
pub fn false_color(map: &ScalarMap, lo: f64, hi: f64) -> ImageBuffer {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let data = map
        .data()
        .iter()
        .flat_map(|&v| {
            let t = ((v - lo) / span).clamp(0.0, 1.0);
            let r = (1.5 - (4.0 * t - 3.0).abs()).clamp(0.0, 1.0);
            let g = (1.5 - (4.0 * t - 2.0).abs()).clamp(0.0, 1.0);
            let b = (1.5 - (4.0 * t - 1.0).abs()).clamp(0.0, 1.0);
            [r, g, b]
        })
        .collect();
    ImageBuffer::new(map.width(), map.height(), 3, data).expect("ramp values are in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_max_maps_to_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("max.png");
        image::ImageBuffer::<Luma<u16>, _>::from_raw(2, 1, vec![65535u16, 0])
            .unwrap()
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0]);
    }

    #[test]
    fn eight_bit_is_divided_by_255() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        image::ImageBuffer::<Luma<u8>, _>::from_raw(1, 1, vec![51u8])
            .unwrap()
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert!((img.data()[0] - 0.2).abs() < 1e-7);
    }

    #[test]
    fn constant_stack_loads_in_angle_order() {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<_> = (0..4).map(|i| dir.path().join(format!("{i}.pfm"))).collect();
        for p in &paths {
            save_image_pfm(p, &ImageBuffer::filled(2, 2, 1, 0.5)).unwrap();
        }
        let stack = load_polar_stack([&paths[0], &paths[1], &paths[2], &paths[3]]).unwrap();
        for ch in stack.channels_by_angle() {
            assert!(ch.data().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn mismatch_names_the_offending_file() {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<_> = (0..4).map(|i| dir.path().join(format!("{i}.pfm"))).collect();
        for (i, p) in paths.iter().enumerate() {
            let w = if i == 2 { 3 } else { 2 };
            save_image_pfm(p, &ImageBuffer::filled(w, 2, 1, 0.1)).unwrap();
        }
        let err = load_polar_stack([&paths[0], &paths[1], &paths[2], &paths[3]]).unwrap_err();
        assert!(err.to_string().contains("2.pfm"), "{err}");
        assert!(matches!(err, Error::FileDimensionMismatch { .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_image(Path::new("/nonexistent/x.png")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn normal_pfm_round_trip_keeps_invalid_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.pfm");
        let nm = NormalMap::new(2, 1, vec![[0.0, 0.6, 0.8], [0.0; 3]], vec![true, false]).unwrap();
        save_normal_pfm(&path, &nm).unwrap();
        let back = load_normal_map(&path).unwrap();
        assert_eq!(back.valid(), nm.valid());
        assert!((back.normals()[0][1] - 0.6).abs() < 1e-7);
    }
}
