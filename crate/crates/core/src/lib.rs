//! Polarization priors: Stokes analysis, Fresnel-based specular/diffuse
//! separation, normal estimation with ambiguity correction, supervision
//! losses and a per-pixel deferred-reflection fit, plus an analytic oracle.

pub mod blend_fit;
pub mod error;
pub mod fresnel;
pub mod imaging;
pub mod losses;
pub mod normals;
pub mod oracle;
pub mod separation;
pub mod stats;
pub mod stokes;

pub use blend_fit::{blend, fit_maps, FitConfig, FitPriors, FitState, FitTargets, ReflectionStrengthMap};
pub use error::{Error, Result};
pub use fresnel::{AnglePair, MaterialConfig};
pub use imaging::{ImageBuffer, Mask, MosaicLayout, NormalMap, PolarStack, RawMosaic, ScalarMap};
pub use losses::{LossConfig, LossReport};
pub use normals::{CandidateRule, DisambiguationConfig};
pub use oracle::{render_synthetic, Geometry, OracleBundle, SceneSpec};
pub use separation::{separate, ReflectionPair};
pub use stokes::{AngleMap, StokesMap};
