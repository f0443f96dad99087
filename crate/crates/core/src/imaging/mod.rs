//! Image containers, file I/O, mosaics and normal-map encoding.

mod buffer;
pub mod demosaic;
pub mod io;
pub mod normal_map;
pub mod pfm;

pub use buffer::{ImageBuffer, Mask, NormalMap, PolarStack, ScalarMap};
pub(crate) use buffer::{dot, ensure_size, norm};
pub use demosaic::{demosaic, mosaic, MosaicLayout, PolarAngle, RawMosaic};
pub use io::load_polar_stack;
pub use normal_map::{decode_normal_map, encode_normal_map};
