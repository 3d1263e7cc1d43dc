//! Convolution building blocks shared by the generator and discriminator.

use candle_core::{DType, Device, Tensor, Var, D};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

/// Variance guard for instance normalization of near-constant maps.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    #[default]
    Zero,
    Reflect,
}

/// Whether a forward pass records the autograd graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Track {
    Grad,
    NoGrad,
}

impl Track {
    fn view(self, var: &Var) -> Tensor {
        match self {
            Track::Grad => var.as_tensor().clone(),
            Track::NoGrad => var.as_detached_tensor(),
        }
    }
}

pub(crate) fn gaussian_var<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &[usize],
    std: f64,
    dtype: DType,
    device: &Device,
) -> Result<Var> {
    let normal = Normal::new(0.0, std).expect("positive std");
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    let t = Tensor::from_vec(data, shape, device)?.to_dtype(dtype)?;
    Ok(Var::from_tensor(&t)?)
}

fn zeros_var(len: usize, dtype: DType, device: &Device) -> Result<Var> {
    Ok(Var::zeros(len, dtype, device)?)
}

/// Square-kernel convolution with explicit (possibly asymmetric) padding.
#[derive(Debug, Clone)]
pub struct Conv {
    pub(crate) weight: Var,
    pub(crate) bias: Var,
    pub stride: usize,
    pub pad_before: usize,
    pub pad_after: usize,
    pub mode: PaddingMode,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<R: Rng + ?Sized>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: (usize, usize),
        mode: PaddingMode,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        Ok(Self {
            weight: gaussian_var(rng, &[out_channels, in_channels, kernel, kernel], INIT_STD, dtype, device)?,
            bias: zeros_var(out_channels, dtype, device)?,
            stride,
            pad_before: pad.0,
            pad_after: pad.1,
            mode,
        })
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims()[3]
    }

    pub fn forward(&self, x: &Tensor, track: Track) -> Result<Tensor> {
        let x = pad2d(x, self.pad_before, self.pad_after, self.mode)?;
        let y = x.conv2d(&track.view(&self.weight), 0, self.stride, 1, 1)?;
        let b = track.view(&self.bias).reshape((1, (), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

/// Transposed convolution; with kernel 4, stride 2, padding 1 it doubles the
/// spatial size exactly.
#[derive(Debug, Clone)]
pub struct ConvTranspose {
    pub(crate) weight: Var,
    pub(crate) bias: Var,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<R: Rng + ?Sized>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        Ok(Self {
            weight: gaussian_var(rng, &[in_channels, out_channels, kernel, kernel], INIT_STD, dtype, device)?,
            bias: zeros_var(out_channels, dtype, device)?,
            stride,
            padding,
        })
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims()[3]
    }

    pub fn forward(&self, x: &Tensor, track: Track) -> Result<Tensor> {
        let y = x.conv_transpose2d(&track.view(&self.weight), self.padding, 0, self.stride, 1)?;
        let b = track.view(&self.bias).reshape((1, (), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

/// Per-sample, per-channel normalization over the spatial dimensions, no
/// affine parameters.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let flat = x.reshape((n, c, h * w))?;
    let mean = flat.mean_keepdim(D::Minus1)?;
    let centered = flat.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    let normed = centered.broadcast_div(&(var + NORM_EPS)?.sqrt()?)?;
    Ok(normed.reshape((n, c, h, w))?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    // max(x, slope * x) for 0 < slope < 1
    Ok(x.maximum(&x.affine(slope, 0.0)?)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}

/// Pads the two spatial dimensions of an NCHW tensor.
pub fn pad2d(x: &Tensor, before: usize, after: usize, mode: PaddingMode) -> Result<Tensor> {
    if before == 0 && after == 0 {
        return Ok(x.clone());
    }
    match mode {
        PaddingMode::Zero => Ok(x.pad_with_zeros(2, before, after)?.pad_with_zeros(3, before, after)?),
        PaddingMode::Reflect => {
            let x = reflect_dim(x, 2, before, after)?;
            reflect_dim(&x, 3, before, after)
        }
    }
}

fn reflect_dim(x: &Tensor, dim: usize, before: usize, after: usize) -> Result<Tensor> {
    let n = x.dims()[dim];
    let idx: Vec<u32> = reflect_indices(n, before, after).into_iter().map(|i| i as u32).collect();
    let idx = Tensor::new(idx.as_slice(), x.device())?;
    Ok(x.index_select(&idx, dim)?)
}

/// Source index for each padded position under mirror reflection without
/// edge repetition (`dcb|abcd|cba`).
pub(crate) fn reflect_indices(n: usize, before: usize, after: usize) -> Vec<usize> {
    let period = 2 * n.saturating_sub(1).max(1);
    (0..before + n + after)
        .map(|p| {
            if n == 1 {
                return 0;
            }
            let i = (p as isize - before as isize).rem_euclid(period as isize) as usize;
            if i < n {
                i
            } else {
                period - i
            }
        })
        .collect()
}
