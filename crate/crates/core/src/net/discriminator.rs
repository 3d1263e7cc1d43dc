//! Five-layer PatchGAN discriminator.

use candle_core::{DType, Device, Tensor, Var};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{instance_norm, leaky_relu, sigmoid, Conv, PaddingMode, Track};
use super::{stack_to_tensor, ProbabilityMap};
use crate::error::{Error, Result};
use crate::stack_io::TextureStack;

pub const KERNEL: usize = 4;
pub const STRIDES: [usize; 5] = [2, 2, 2, 1, 1];

/// Padding `(1, 2)` makes each layer produce `ceil(n / stride)` cells.
const PAD: (usize, usize) = (1, 2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    /// Width of the first layer; doubles per layer up to the fourth.
    pub base_channels: usize,
    pub negative_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            base_channels: 64,
            negative_slope: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    layers: Vec<Conv>,
}

impl Discriminator {
    pub fn build(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        Self::build_on(config, seed, DType::F32, &Device::Cpu)
    }

    pub fn build_on(config: DiscriminatorConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        if config.base_channels == 0 {
            return Err(Error::InvalidConfig("discriminator base_channels must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = config.base_channels;
        let widths = [6, b, 2 * b, 4 * b, 8 * b, 1];
        let layers = STRIDES
            .iter()
            .enumerate()
            .map(|(i, &stride)| {
                Conv::new(
                    &mut rng,
                    widths[i],
                    widths[i + 1],
                    KERNEL,
                    stride,
                    PAD,
                    PaddingMode::Zero,
                    dtype,
                    device,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    /// Input pixels per output cell.
    pub fn downsample_factor(&self) -> usize {
        STRIDES.iter().product()
    }

    /// Side of the input window seen by one output cell.
    pub fn receptive_field(&self) -> usize {
        let (rf, _) = STRIDES
            .iter()
            .fold((1, 1), |(rf, jump), &s| (rf + (KERNEL - 1) * jump, jump * s));
        rf
    }

    /// Score-map side for an input side `n`.
    pub fn output_side(&self, n: usize) -> usize {
        STRIDES.iter().fold(n, |n, &s| n.div_ceil(s))
    }

    /// `1 x 6 x H x W` to `1 x 1 x h_d x w_d` scores in `[0, 1]`.
    pub fn forward_tensor(&self, x: &Tensor, track: Track) -> Result<Tensor> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h, track)?;
            h = if i < last {
                leaky_relu(&instance_norm(&h)?, self.config.negative_slope)?
            } else {
                sigmoid(&h)?
            };
        }
        Ok(h)
    }

    pub fn discriminate(&self, stack: &TextureStack) -> Result<ProbabilityMap> {
        let rf = self.receptive_field();
        if stack.min_side() < rf {
            return Err(Error::InputTooSmall {
                height: stack.height(),
                width: stack.width(),
                required: rf,
            });
        }
        let x = stack_to_tensor(stack, self.dtype(), self.device())?;
        let y = self.forward_tensor(&x, Track::NoGrad)?;
        let (_, _, hd, wd) = y.dims4()?;
        let data: Vec<f32> = y.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
        let scores = Array2::from_shape_vec((hd, wd), data).expect("h_d * w_d scores");
        ProbabilityMap::new(scores, self.downsample_factor())
    }

    pub fn dtype(&self) -> DType {
        self.layers[0].weight.dtype()
    }

    pub fn device(&self) -> &Device {
        self.layers[0].weight.device()
    }

    pub fn named_vars(&self) -> Vec<(String, Var)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layers.{i}.weight"), l.weight.clone()),
                    (format!("layers.{i}.bias"), l.bias.clone()),
                ]
            })
            .collect()
    }

    pub fn vars(&self) -> Vec<Var> {
        self.named_vars().into_iter().map(|(_, v)| v).collect()
    }

    /// Deep copy with independent weight storage.
    pub fn snapshot(&self) -> Result<Self> {
        let mut copy = self.clone();
        for l in copy.layers.iter_mut() {
            l.weight = Var::from_tensor(&l.weight.as_tensor().copy()?)?;
            l.bias = Var::from_tensor(&l.bias.as_tensor().copy()?)?;
        }
        Ok(copy)
    }
}
