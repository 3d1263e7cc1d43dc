//! Generator and PatchGAN discriminator networks.

pub mod checkpoint;
pub mod discriminator;
pub mod generator;
pub mod layers;
pub mod receptive;

use candle_core::{DType, Device, Tensor};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{DecoderMode, Generator, GeneratorConfig, LatentField};
pub use layers::{PaddingMode, Track};

use crate::error::{Error, Result};
use crate::stack_io::TextureStack;

/// Packs a stack into a `1 x 6 x H x W` tensor: albedo RGB then normals RGB.
pub fn stack_to_tensor(stack: &TextureStack, dtype: DType, device: &Device) -> Result<Tensor> {
    let (h, w) = (stack.height(), stack.width());
    let mut data = Vec::with_capacity(6 * h * w);
    for map in [stack.albedo(), stack.normals()] {
        for c in 0..3 {
            data.extend(map.slice(ndarray::s![.., .., c]).iter().copied());
        }
    }
    Ok(Tensor::from_vec(data, (1, 6, h, w), device)?.to_dtype(dtype)?)
}

/// Inverse of [`stack_to_tensor`]; values are clamped to `[0, 1]`.
pub fn tensor_to_stack(t: &Tensor) -> Result<TextureStack> {
    let (n, c, h, w) = t.dims4()?;
    if n != 1 || c != 6 {
        return Err(Error::ShapeMismatch(format!("expected 1x6xHxW, got {n}x{c}x{h}x{w}")));
    }
    let data: Vec<f32> = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    let plane = h * w;
    let map = |first: usize| {
        Array3::from_shape_fn((h, w, 3), |(y, x, ch)| {
            data[(first + ch) * plane + y * w + x].clamp(0.0, 1.0)
        })
    };
    Ok(TextureStack::from_parts_unchecked(map(0), map(3)))
}

/// Per-patch realness scores emitted by the discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMap {
    scores: Array2<f32>,
    downsample_factor: usize,
}

impl ProbabilityMap {
    pub fn new(scores: Array2<f32>, downsample_factor: usize) -> Result<Self> {
        if scores.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ShapeMismatch("scores must lie in [0, 1]".into()));
        }
        Ok(Self {
            scores,
            downsample_factor,
        })
    }

    pub fn scores(&self) -> &Array2<f32> {
        &self.scores
    }

    pub fn downsample_factor(&self) -> usize {
        self.downsample_factor
    }

    pub fn height(&self) -> usize {
        self.scores.nrows()
    }

    pub fn width(&self) -> usize {
        self.scores.ncols()
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().map(|&v| v as f64).sum::<f64>() / self.scores.len() as f64
    }
}
