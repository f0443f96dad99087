//! Normal map colour encoding: each component maps v -> (v + 1) / 2.

use super::buffer::{ImageBuffer, NormalMap};
use crate::error::Result;

/// Invalid pixels encode as (0, 0, 0).
pub fn encode_normal_map(n: &NormalMap) -> ImageBuffer {
    let data = n
        .normals()
        .iter()
        .zip(n.valid())
        .flat_map(|(v, &ok)| {
            if ok {
                v.map(|c| ((c + 1.0) * 0.5).clamp(0.0, 1.0))
            } else {
                [0.0; 3]
            }
        })
        .collect();
    ImageBuffer::new(n.width(), n.height(), 3, data).expect("encoded components lie in [0, 1]")
}

/// Inverse of [`encode_normal_map`]. Pure black pixels decode as invalid.
pub fn decode_normal_map(img: &ImageBuffer) -> Result<NormalMap> {
    let rgb = if img.channels() == 3 {
        img.clone()
    } else {
        return Err(crate::error::Error::InvalidImage(
            "encoded normal maps must have 3 channels".into(),
        ));
    };
    let mut normals = Vec::with_capacity(rgb.pixel_count());
    let mut valid = Vec::with_capacity(rgb.pixel_count());
    for px in rgb.data().chunks_exact(3) {
        let ok = px.iter().any(|&c| c != 0.0);
        valid.push(ok);
        normals.push(if ok { [px[0] * 2.0 - 1.0, px[1] * 2.0 - 1.0, px[2] * 2.0 - 1.0] } else { [0.0; 3] });
    }
    NormalMap::new(img.width(), img.height(), normals, valid)
}
