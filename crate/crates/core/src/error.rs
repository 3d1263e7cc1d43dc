use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileMissing(PathBuf),

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("albedo is {albedo_h}x{albedo_w} but normals are {normals_h}x{normals_w}")]
    DimensionMismatch {
        albedo_h: usize,
        albedo_w: usize,
        normals_h: usize,
        normals_w: usize,
    },

    #[error("crop of side {size} does not fit a {height}x{width} stack")]
    CropTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },

    #[error("degenerate crop: {0}")]
    DegenerateCrop(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("input side {0} is not divisible by 4")]
    SizeNotDivisible(usize),

    #[error("split level {level} outside [0, {max}]")]
    InvalidSplitLevel { level: usize, max: usize },

    #[error("input {height}x{width} is smaller than the discriminator receptive field {required}")]
    InputTooSmall {
        height: usize,
        width: usize,
        required: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("feature extractor unavailable: {0}")]
    ExtractorUnavailable(String),

    #[error("stack min side {side} is smaller than the 2k = {required} training target")]
    StackTooSmall { side: usize, required: usize },

    #[error("probability map {height}x{width} is too small for band fraction {band_fraction}")]
    MapTooSmall {
        height: usize,
        width: usize,
        band_fraction: f64,
    },

    #[error("invalid crop range: {0}")]
    CropRangeInvalid(String),

    #[error("shift {shift} must be smaller than the stack min side {side}")]
    ShiftTooLarge { shift: usize, side: usize },

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error("invalid checkpoint {path}: {reason}")]
    InvalidCheckpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
