//! Convolutional feature extractors for the style loss and perceptual metrics.
//!
//! A pretrained backbone is read from a safetensors file whose tensors follow
//! the VGG naming `conv{stage}_{index}.weight` / `.bias` (OIHW layout), e.g.
//! `conv1_1.weight`, `conv1_2.weight`, `conv2_1.weight`, ... Stages after the
//! first are preceded by 2x2 average pooling, and the tapped feature of each
//! stage is the ReLU output of its first convolution. Inputs are normalized
//! with the ImageNet mean and standard deviation.
//!
//! Without such a file, [`ConvExtractor::random`] builds a narrow network of
//! fixed random filters with the same stage layout.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::safetensors::Load;
use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Environment variable naming the pretrained backbone file.
pub const BACKBONE_ENV: &str = "TILESYNTH_BACKBONE";

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

pub trait FeatureExtractor: Send + Sync {
    /// Tapped feature maps for a `1 x 3 x H x W` image in `[0, 1]`.
    fn features(&self, image: &Tensor) -> Result<Vec<Tensor>>;

    /// Per-layer style weights, one per tapped layer.
    fn layer_weights(&self) -> Vec<f64>;

    /// True when the weights come from a trained backbone.
    fn is_pretrained(&self) -> bool;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone)]
struct ConvLayer {
    weight: Tensor,
    bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ConvExtractor {
    stages: Vec<Vec<ConvLayer>>,
    mean: [f32; 3],
    std: [f32; 3],
    pretrained: bool,
    name: String,
}

impl ConvExtractor {
    /// Fixed random 3x3 filters (He-normal), one conv per stage.
    pub fn random(seed: u64) -> Self {
        Self::random_with_widths(seed, &[8, 16, 32, 32, 32])
    }

    pub fn random_with_widths(seed: u64, widths: &[usize]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = 3;
        let stages = widths
            .iter()
            .map(|&out| {
                let fan_in = (in_ch * 9) as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
                let data: Vec<f32> = (0..out * in_ch * 9).map(|_| normal.sample(&mut rng) as f32).collect();
                let weight = Tensor::from_vec(data, (out, in_ch, 3, 3), &Device::Cpu).expect("sized buffer");
                let bias = Tensor::zeros(out, DType::F32, &Device::Cpu).expect("cpu alloc");
                in_ch = out;
                vec![ConvLayer { weight, bias }]
            })
            .collect();
        Self {
            stages,
            mean: [0.5; 3],
            std: [0.5; 3],
            pretrained: false,
            name: format!("random-filters(seed={seed})"),
        }
    }

    /// Loads a VGG-style backbone (see module docs).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileMissing(path.to_path_buf()));
        }
        let unavailable = |reason: String| Error::ExtractorUnavailable(format!("{}: {reason}", path.display()));
        let bytes = std::fs::read(path)?;
        let st = safetensors::SafeTensors::deserialize(&bytes).map_err(|e| unavailable(e.to_string()))?;
        let mut layers: BTreeMap<(usize, usize), (Option<Tensor>, Option<Tensor>)> = BTreeMap::new();
        for (name, view) in st.tensors() {
            let Some((stage, index, kind)) = parse_vgg_name(&name) else {
                continue;
            };
            let t = view.load(&Device::Cpu)?.to_dtype(DType::F32)?;
            let slot = layers.entry((stage, index)).or_default();
            match kind {
                "weight" => slot.0 = Some(t),
                _ => slot.1 = Some(t),
            }
        }
        let mut stages: Vec<Vec<ConvLayer>> = Vec::new();
        for ((stage, index), (weight, bias)) in layers {
            let weight = weight.ok_or_else(|| unavailable(format!("conv{stage}_{index} has no weight")))?;
            let out = weight.dims()[0];
            let bias = match bias {
                Some(b) => b,
                None => Tensor::zeros(out, DType::F32, &Device::Cpu)?,
            };
            if stage != stages.len() && stage != stages.len() + 1 {
                return Err(unavailable(format!("stage conv{stage}_* is not contiguous")));
            }
            if stage == stages.len() + 1 {
                stages.push(Vec::new());
            }
            stages.last_mut().expect("pushed").push(ConvLayer { weight, bias });
        }
        if stages.is_empty() {
            return Err(unavailable("no conv{stage}_{index} tensors".into()));
        }
        Ok(Self {
            stages,
            mean: IMAGENET_MEAN,
            std: IMAGENET_STD,
            pretrained: true,
            name: format!("pretrained({})", path.display()),
        })
    }

    /// Loads the backbone named by [`BACKBONE_ENV`], falling back to random
    /// filters with a warning when it is unset or unreadable.
    pub fn from_env_or_random(seed: u64) -> Self {
        match std::env::var_os(BACKBONE_ENV) {
            Some(path) => match Self::load(&path) {
                Ok(e) => e,
                Err(err) => {
                    log::warn!("cannot load backbone from {BACKBONE_ENV}: {err}; using random filters");
                    Self::random(seed)
                }
            },
            None => {
                log::warn!("{BACKBONE_ENV} not set; style features use random filters");
                Self::random(seed)
            }
        }
    }

    pub fn num_layers(&self) -> usize {
        self.stages.len()
    }
}

fn parse_vgg_name(name: &str) -> Option<(usize, usize, &str)> {
    let (layer, kind) = name.rsplit_once('.')?;
    if kind != "weight" && kind != "bias" {
        return None;
    }
    let (stage, index) = layer.strip_prefix("conv")?.split_once('_')?;
    Some((stage.parse().ok()?, index.parse().ok()?, kind))
}

impl FeatureExtractor for ConvExtractor {
    fn features(&self, image: &Tensor) -> Result<Vec<Tensor>> {
        let dtype = image.dtype();
        let dev = image.device();
        let mean = Tensor::new(&self.mean, dev)?.to_dtype(dtype)?.reshape((1, 3, 1, 1))?;
        let std = Tensor::new(&self.std, dev)?.to_dtype(dtype)?.reshape((1, 3, 1, 1))?;
        let mut h = image.broadcast_sub(&mean)?.broadcast_div(&std)?;
        let mut taps = Vec::with_capacity(self.stages.len());
        for (s, stage) in self.stages.iter().enumerate() {
            if s > 0 {
                let (_, _, hh, ww) = h.dims4()?;
                if hh < 2 || ww < 2 {
                    return Err(Error::ExtractorUnavailable(format!(
                        "input too small for {} stages",
                        self.stages.len()
                    )));
                }
                h = h.avg_pool2d(2)?;
            }
            for (i, layer) in stage.iter().enumerate() {
                let k = layer.weight.dims()[2];
                h = h
                    .conv2d(&layer.weight.to_dtype(dtype)?, k / 2, 1, 1, 1)?
                    .broadcast_add(&layer.bias.to_dtype(dtype)?.reshape((1, (), 1, 1))?)?
                    .relu()?;
                if i == 0 {
                    taps.push(h.clone());
                }
            }
        }
        Ok(taps)
    }

    fn layer_weights(&self) -> Vec<f64> {
        let n = self.stages.len();
        vec![1.0 / n as f64; n]
    }

    fn is_pretrained(&self) -> bool {
        self.pretrained
    }

    fn name(&self) -> &str {
        &self.name
    }
}
