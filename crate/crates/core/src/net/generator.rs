//! Fully-convolutional encoder / residual / decoder generator with latent
//! field tiling.

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{instance_norm, sigmoid, Conv, ConvTranspose, PaddingMode, Track};
use super::receptive::Layer1d;
use super::{stack_to_tensor, tensor_to_stack};
use crate::error::{Error, Result};
use crate::stack_io::{center_crop, TextureStack};

/// How the shared latent space is decoded into the output maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    /// One decoder emitting all six channels.
    Joint,
    /// One three-channel decoder per map over a shared latent space.
    #[default]
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Training crop side `k`.
    pub input_size: usize,
    pub num_residual_blocks: usize,
    /// Width of the first encoder layer; the latent space has twice this.
    pub base_channels: usize,
    pub decoder_mode: DecoderMode,
    /// Number of residual blocks applied before the latent is tiled.
    pub split_level: usize,
    pub padding_mode: PaddingMode,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            input_size: 128,
            num_residual_blocks: 5,
            base_channels: 64,
            decoder_mode: DecoderMode::Split,
            split_level: 0,
            padding_mode: PaddingMode::Zero,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 4 != 0 {
            return Err(Error::InvalidConfig(format!(
                "input size {} must be a positive multiple of 4",
                self.input_size
            )));
        }
        if self.split_level > self.num_residual_blocks {
            return Err(Error::InvalidConfig(format!(
                "split level {} exceeds {} residual blocks",
                self.split_level, self.num_residual_blocks
            )));
        }
        if self.base_channels < 2 {
            return Err(Error::InvalidConfig("base_channels must be at least 2".into()));
        }
        Ok(())
    }

    pub fn latent_channels(&self) -> usize {
        2 * self.base_channels
    }
}

/// Spatial feature tensor inside the generator, `1 x C x h x w`.
#[derive(Debug, Clone)]
pub struct LatentField {
    pub features: Tensor,
    /// Number of residual blocks that produced it (0 = encoder output).
    pub level: usize,
    pub tiled: bool,
}

impl LatentField {
    /// Repeats the field 2x2 in space.
    pub fn tile(&self) -> Result<Self> {
        let row = Tensor::cat(&[&self.features, &self.features], 3)?;
        let features = Tensor::cat(&[&row, &row], 2)?;
        Ok(Self {
            features,
            level: self.level,
            tiled: true,
        })
    }

    pub fn spatial(&self) -> Result<(usize, usize)> {
        let (_, _, h, w) = self.features.dims4()?;
        Ok((h, w))
    }
}

#[derive(Debug, Clone)]
struct ResidualBlock {
    conv1: Conv,
    conv2: Conv,
}

impl ResidualBlock {
    fn forward(&self, x: &Tensor, track: Track) -> Result<Tensor> {
        let h = instance_norm(&self.conv1.forward(x, track)?)?.relu()?;
        let h = instance_norm(&self.conv2.forward(&h, track)?)?;
        Ok((h + x)?)
    }
}

#[derive(Debug, Clone)]
struct Decoder {
    up1: ConvTranspose,
    up2: ConvTranspose,
    out: Conv,
}

impl Decoder {
    fn forward(&self, x: &Tensor, track: Track) -> Result<Tensor> {
        let h = instance_norm(&self.up1.forward(x, track)?)?.relu()?;
        let h = instance_norm(&self.up2.forward(&h, track)?)?.relu()?;
        sigmoid(&self.out.forward(&h, track)?)
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    conv_in: Conv,
    conv_down: Conv,
    blocks: Vec<ResidualBlock>,
    decoders: Vec<Decoder>,
}

impl Generator {
    /// Builds a generator with N(0, 0.02^2) weights and zero biases.
    pub fn build(config: GeneratorConfig, seed: u64) -> Result<Self> {
        Self::build_on(config, seed, DType::F32, &Device::Cpu)
    }

    pub fn build_on(config: GeneratorConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let b = config.base_channels;
        let latent = config.latent_channels();
        let pad = config.padding_mode;
        let conv_in = Conv::new(rng, 6, b, 3, 1, (1, 1), pad, dtype, device)?;
        let conv_down = Conv::new(rng, b, latent, 3, 2, (1, 1), pad, dtype, device)?;
        let blocks = (0..config.num_residual_blocks)
            .map(|_| {
                Ok(ResidualBlock {
                    conv1: Conv::new(rng, latent, latent, 3, 1, (1, 1), pad, dtype, device)?,
                    conv2: Conv::new(rng, latent, latent, 3, 1, (1, 1), pad, dtype, device)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let heads: &[usize] = match config.decoder_mode {
            DecoderMode::Joint => &[6],
            DecoderMode::Split => &[3, 3],
        };
        let mid = (b / 2).max(1);
        let decoders = heads
            .iter()
            .map(|&out| {
                Ok(Decoder {
                    up1: ConvTranspose::new(rng, latent, b, 4, 2, 1, dtype, device)?,
                    up2: ConvTranspose::new(rng, b, mid, 4, 2, 1, dtype, device)?,
                    out: Conv::new(rng, mid, out, 3, 1, (1, 1), pad, dtype, device)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            conv_in,
            conv_down,
            blocks,
            decoders,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Encoder: same-resolution conv then a stride-2 conv, each followed by
    /// instance norm and ReLU. Output has half the input resolution.
    pub fn encode(&self, x: &Tensor, track: Track) -> Result<LatentField> {
        let h = instance_norm(&self.conv_in.forward(x, track)?)?.relu()?;
        let h = instance_norm(&self.conv_down.forward(&h, track)?)?.relu()?;
        Ok(LatentField {
            features: h,
            level: 0,
            tiled: false,
        })
    }

    /// Applies residual block `field.level + 1`: `x_i = R_i(x_{i-1}) + x_{i-1}`.
    pub fn advance(&self, field: &LatentField, track: Track) -> Result<LatentField> {
        let block = self.blocks.get(field.level).ok_or(Error::InvalidSplitLevel {
            level: field.level + 1,
            max: self.blocks.len(),
        })?;
        Ok(LatentField {
            features: block.forward(&field.features, track)?,
            level: field.level + 1,
            tiled: field.tiled,
        })
    }

    /// Runs every decoder head on the final latent; one tensor per head.
    pub fn decode_heads(&self, field: &LatentField, track: Track) -> Result<Vec<Tensor>> {
        self.decoders.iter().map(|d| d.forward(&field.features, track)).collect()
    }

    /// Decodes to a `1 x 6 x H x W` tensor (albedo channels first).
    pub fn decode(&self, field: &LatentField, track: Track) -> Result<Tensor> {
        let heads = self.decode_heads(field, track)?;
        if heads.len() == 1 {
            Ok(heads.into_iter().next().expect("one head"))
        } else {
            Ok(Tensor::cat(&heads, 1)?)
        }
    }

    /// Tensor-level forward pass: `1 x 6 x s x s` to `1 x 6 x 2s x 2s`.
    pub fn forward_tensor(&self, x: &Tensor, track: Track) -> Result<Tensor> {
        let mut field = self.encode(x, track)?;
        while field.level < self.blocks.len() {
            field = self.advance(&field, track)?;
        }
        self.decode(&field, track)
    }

    pub fn forward(&self, input: &TextureStack) -> Result<TextureStack> {
        check_divisible(input)?;
        let x = stack_to_tensor(input, self.dtype(), self.device())?;
        tensor_to_stack(&self.forward_tensor(&x, Track::NoGrad)?)
    }

    /// Encodes and runs `split_level` residual blocks, then tiles 2x2.
    pub fn latent_field(&self, input: &TextureStack, split_level: usize) -> Result<LatentField> {
        check_divisible(input)?;
        self.check_split(split_level)?;
        let x = stack_to_tensor(input, self.dtype(), self.device())?;
        let mut field = self.encode(&x, Track::NoGrad)?;
        while field.level < split_level {
            field = self.advance(&field, Track::NoGrad)?;
        }
        field.tile()
    }

    /// Latent-field synthesis: returns the 4x pre-crop output and its centered
    /// half-side crop, which tiles seamlessly.
    pub fn generate_seamless(
        &self,
        input: &TextureStack,
        split_level: usize,
    ) -> Result<(TextureStack, TextureStack)> {
        let mut field = self.latent_field(input, split_level)?;
        while field.level < self.blocks.len() {
            field = self.advance(&field, Track::NoGrad)?;
        }
        let pre_crop = tensor_to_stack(&self.decode(&field, Track::NoGrad)?)?;
        let tileable = center_crop(&pre_crop, 0.5)?;
        Ok((pre_crop, tileable))
    }

    fn check_split(&self, split_level: usize) -> Result<()> {
        if split_level > self.blocks.len() {
            return Err(Error::InvalidSplitLevel {
                level: split_level,
                max: self.blocks.len(),
            });
        }
        Ok(())
    }

    /// 1-D geometry of every layer applied after a latent tiled at
    /// `split_level`, used for receptive-field bookkeeping.
    pub fn layers_after_split(&self, split_level: usize) -> Vec<Layer1d> {
        let conv = |c: &Conv| Layer1d::Conv {
            kernel: c.kernel(),
            stride: c.stride,
            pad_before: c.pad_before,
            pad_after: c.pad_after,
        };
        let mut layers = Vec::new();
        for block in &self.blocks[split_level.min(self.blocks.len())..] {
            layers.push(Layer1d::Residual(vec![conv(&block.conv1), conv(&block.conv2)]));
        }
        // All heads share the same geometry.
        let d = &self.decoders[0];
        for up in [&d.up1, &d.up2] {
            layers.push(Layer1d::ConvTranspose {
                kernel: up.kernel(),
                stride: up.stride,
                padding: up.padding,
            });
        }
        layers.push(conv(&d.out));
        layers
    }

    pub fn dtype(&self) -> DType {
        self.conv_in.weight.dtype()
    }

    pub fn device(&self) -> &Device {
        self.conv_in.weight.device()
    }

    /// Every trainable tensor with a stable name.
    pub fn named_vars(&self) -> Vec<(String, Var)> {
        let mut out = Vec::new();
        let mut conv = |name: String, c: &Conv| {
            out.push((format!("{name}.weight"), c.weight.clone()));
            out.push((format!("{name}.bias"), c.bias.clone()));
        };
        conv("encoder.conv_in".into(), &self.conv_in);
        conv("encoder.conv_down".into(), &self.conv_down);
        for (i, b) in self.blocks.iter().enumerate() {
            conv(format!("residual.{i}.conv1"), &b.conv1);
            conv(format!("residual.{i}.conv2"), &b.conv2);
        }
        for (i, d) in self.decoders.iter().enumerate() {
            conv(format!("decoder.{i}.out"), &d.out);
        }
        for (i, d) in self.decoders.iter().enumerate() {
            for (name, up) in [("up1", &d.up1), ("up2", &d.up2)] {
                out.push((format!("decoder.{i}.{name}.weight"), up.weight.clone()));
                out.push((format!("decoder.{i}.{name}.bias"), up.bias.clone()));
            }
        }
        out
    }

    pub fn vars(&self) -> Vec<Var> {
        self.named_vars().into_iter().map(|(_, v)| v).collect()
    }

    /// Deep copy with independent weight storage (a plain `clone` shares it).
    pub fn snapshot(&self) -> Result<Self> {
        let mut copy = self.clone();
        let fresh = |v: &Var| -> Result<Var> { Ok(Var::from_tensor(&v.as_tensor().copy()?)?) };
        copy.conv_in.weight = fresh(&self.conv_in.weight)?;
        copy.conv_in.bias = fresh(&self.conv_in.bias)?;
        copy.conv_down.weight = fresh(&self.conv_down.weight)?;
        copy.conv_down.bias = fresh(&self.conv_down.bias)?;
        for b in copy.blocks.iter_mut() {
            for c in [&mut b.conv1, &mut b.conv2] {
                c.weight = fresh(&c.weight)?;
                c.bias = fresh(&c.bias)?;
            }
        }
        for d in copy.decoders.iter_mut() {
            d.out.weight = fresh(&d.out.weight)?;
            d.out.bias = fresh(&d.out.bias)?;
            for up in [&mut d.up1, &mut d.up2] {
                up.weight = fresh(&up.weight)?;
                up.bias = fresh(&up.bias)?;
            }
        }
        Ok(copy)
    }
}

fn check_divisible(input: &TextureStack) -> Result<()> {
    for side in [input.height(), input.width()] {
        if side % 4 != 0 {
            return Err(Error::SizeNotDivisible(side));
        }
    }
    Ok(())
}
