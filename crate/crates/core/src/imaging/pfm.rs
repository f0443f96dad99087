//! Portable float map reader/writer.
//!
//! Writes little-endian (negative scale) with rows stored bottom-to-top as the
//! format prescribes. Reads either endianness.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Raw float raster, top-to-bottom row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

pub fn encode(raster: &FloatRaster) -> Vec<u8> {
    let tag = match raster.channels {
        1 => "Pf",
        3 => "PF",
        c => panic!("PFM supports 1 or 3 channels, got {c}"),
    };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", raster.width, raster.height).into_bytes();
    let row_len = raster.width * raster.channels;
    out.reserve(raster.data.len() * 4);
    for row in raster.data.chunks_exact(row_len.max(1)).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write(path: &Path, raster: &FloatRaster) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode(raster)).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<FloatRaster> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(&mut BufReader::new(file)).map_err(|msg| Error::decode(path, msg))
}

fn read_token_line(reader: &mut impl BufRead) -> std::result::Result<String, String> {
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| e.to_string())?;
        if n == 0 {
            return Err("unexpected end of PFM header".into());
        }
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            return Ok(trimmed.to_string());
        }
    }
}

pub fn decode(reader: &mut impl BufRead) -> std::result::Result<FloatRaster, String> {
    let channels = match read_token_line(reader)?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(format!("invalid PFM magic {other:?}")),
    };
    let dims = read_token_line(reader)?;
    let mut parts = dims.split_whitespace();
    let (Some(w), Some(h), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("invalid PFM dimensions line {dims:?}"));
    };
    let width: usize = w.parse().map_err(|_| format!("invalid width {w:?}"))?;
    let height: usize = h.parse().map_err(|_| format!("invalid height {h:?}"))?;
    let scale_line = read_token_line(reader)?;
    let scale: f32 = scale_line
        .parse()
        .map_err(|_| format!("invalid scale {scale_line:?}"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format!("invalid scale {scale}"));
    }
    let little_endian = scale < 0.0;

    let count = width * height * channels;
    let mut bytes = vec![0u8; count * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|e| format!("truncated PFM payload: {e}"))?;
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();

    // stored bottom-to-top
    let row_len = width * channels;
    let mut data = Vec::with_capacity(count);
    for row in values.chunks_exact(row_len.max(1)).rev() {
        data.extend_from_slice(row);
    }
    Ok(FloatRaster {
        width,
        height,
        channels,
        data,
    })
}
