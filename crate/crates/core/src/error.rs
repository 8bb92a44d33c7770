use thiserror::Error;

use crate::model::ModelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown distortion model {0:?} (expected FOV, DM or ED)")]
    UnknownModel(String),
    #[error("invalid parameter range [{k_min}, {k_max}]: need finite k_min < k_max")]
    InvalidRange { k_min: f64, k_max: f64 },
    #[error("{model} parameter {k} outside admissible range [{k_min}, {k_max}]")]
    ParamOutOfRange { model: ModelKind, k: f64, k_min: f64, k_max: f64 },
    #[error("normalized parameter {0} outside [0, 1]")]
    NormalizedOutOfRange(f64),
    #[error("radius must be a non-negative number, got {0}")]
    InvalidRadius(f64),
    #[error("{model} backward mapping has no real root at r_u={r_u}, k={k}")]
    NoRealRoot { model: ModelKind, r_u: f64, k: f64 },
    #[error("image must be square for radial warping, got {height}x{width}")]
    NotSquare { height: usize, width: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("image {height}x{width} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall { height: usize, width: usize, window: usize },
    #[error(
        "inter-model consistency cannot be used alone: without an intra-model term every \
         model can agree on a shared, still distorted, rectification (trivial solution)"
    )]
    InterOnly,
    #[error("invalid loss specification: {0}")]
    InvalidLossSpec(String),
    #[error("group state lacks model {0}")]
    MissingModel(ModelKind),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("objective is infinite at every grid point ({points} points); the valid overlap is too small")]
    ObjectiveNotFinite { points: usize },
    #[error("estimation needs at least one model with two distorted images; a single image gives no consistency signal")]
    SingleImage,
}
