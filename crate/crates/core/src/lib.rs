//! Lens distortion modeling and self-supervised rectification.
//!
//! Three single-parameter radial models (FOV, division, equidistant) are
//! rendered with inverse-mapping bilinear warps. Distortion parameters of a
//! group of distorted views of one scene are recovered without labels by
//! minimizing intra-model and inter-model consistency losses.

pub mod error;
pub mod estimator;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod scenes;
pub mod selftest;
pub mod synthesis;
pub mod warp;

pub use error::{Error, Result};
pub use image::{ImageBuffer, Mask};
pub use model::{DistortionModel, ModelKind, ParamRange};
pub use warp::{distort, rectify, WarpResult};

/// Side length of prepared normal images.
pub const IMAGE_SIZE: usize = 257;

/// Erosion applied to validity masks before scoring.
pub const METRIC_EROSION: usize = 4;
