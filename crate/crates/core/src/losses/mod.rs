//! Training objective: adversarial, per-map L1 and Gram-matrix style terms.

mod extractor;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

pub use extractor::{ConvExtractor, FeatureExtractor, BACKBONE_ENV};

use crate::error::{Error, Result};
use crate::net::ProbabilityMap;

/// Lower clamp applied to every `log` argument.
pub const LOG_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub adv: f64,
    pub l1_albedo: f64,
    pub l1_normals: f64,
    pub style: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            adv: 1.0,
            l1_albedo: 10.0,
            l1_normals: 10.0,
            style: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.adv, self.l1_albedo, self.l1_normals, self.style];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidTrainConfig(format!("loss weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// Raw (unweighted) values of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub adv: f64,
    pub l1_albedo: f64,
    pub l1_normals: f64,
    pub style: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adv: f64,
    pub l1_albedo: f64,
    pub l1_normals: f64,
    pub style: f64,
    pub total: f64,
    pub non_adversarial: f64,
}

/// Weighted global objective and its non-adversarial part.
pub fn total_loss(parts: LossParts, weights: &LossWeights) -> LossBreakdown {
    let non_adversarial =
        weights.l1_albedo * parts.l1_albedo + weights.l1_normals * parts.l1_normals + weights.style * parts.style;
    LossBreakdown {
        adv: parts.adv,
        l1_albedo: parts.l1_albedo,
        l1_normals: parts.l1_normals,
        style: parts.style,
        total: weights.adv * parts.adv + non_adversarial,
        non_adversarial,
    }
}

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Mean absolute difference over every element.
pub fn l1_loss(predicted: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_same_shape(predicted, target)?;
    Ok((predicted - target)?.abs()?.mean_all()?)
}

/// Channel correlation matrix of a `1 x C x h x w` (or `C x h x w`) feature
/// map, normalized by `h * w * C`.
pub fn gram_matrix(features: &Tensor) -> Result<Tensor> {
    let dims = features.dims();
    let (c, h, w) = match *dims {
        [1, c, h, w] | [c, h, w] => (c, h, w),
        _ => return Err(Error::ShapeMismatch(format!("expected CxHxW features, got {dims:?}"))),
    };
    let f = features.reshape((c, h * w))?;
    let g = f.matmul(&f.t()?)?;
    Ok((g / (h * w * c) as f64)?)
}

/// Sum over maps {albedo, normals} and extractor layers of the weighted
/// squared Frobenius distance between Gram matrices.
///
/// `predicted` and `target` are `1 x 6 x H x W` stack tensors.
pub fn style_loss(predicted: &Tensor, target: &Tensor, extractor: &dyn FeatureExtractor) -> Result<Tensor> {
    check_same_shape(predicted, target)?;
    let weights = extractor.layer_weights();
    if weights.is_empty() {
        return Err(Error::ExtractorUnavailable(format!("{} exposes no layers", extractor.name())));
    }
    let mut terms = Vec::new();
    for first in [0, 3] {
        let p = extractor.features(&predicted.narrow(1, first, 3)?)?;
        let t = extractor.features(&target.narrow(1, first, 3)?)?;
        if p.len() != weights.len() || t.len() != weights.len() {
            return Err(Error::ExtractorUnavailable(format!(
                "{} returned {} layers, expected {}",
                extractor.name(),
                p.len(),
                weights.len()
            )));
        }
        for ((fp, ft), w) in p.iter().zip(&t).zip(&weights) {
            let diff = (gram_matrix(fp)? - gram_matrix(ft)?)?;
            terms.push((diff.sqr()?.sum_all()? * *w)?);
        }
    }
    Ok(Tensor::stack(&terms, 0)?.sum_all()?)
}

fn mean_log(p: &Tensor) -> Result<Tensor> {
    Ok(p.clamp(LOG_CLAMP, 1.0)?.log()?.mean_all()?)
}

/// Discriminator BCE: `-mean(log real) - mean(log(1 - fake))`.
pub fn discriminator_loss(scores_real: &Tensor, scores_fake: &Tensor) -> Result<Tensor> {
    let one_minus_fake = scores_fake.affine(-1.0, 1.0)?;
    Ok((mean_log(scores_real)? + mean_log(&one_minus_fake)?)?.neg()?)
}

/// Non-saturating generator loss: `-mean(log fake)`.
pub fn generator_adv_loss(scores_fake: &Tensor) -> Result<Tensor> {
    Ok(mean_log(scores_fake)?.neg()?)
}

/// `(d_loss, g_loss)` for a pair of discriminator score maps.
pub fn adversarial_losses(scores_real: &ProbabilityMap, scores_fake: &ProbabilityMap) -> Result<(f64, f64)> {
    let to_tensor = |m: &ProbabilityMap| -> Result<Tensor> {
        let s = m.scores();
        let data: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        Ok(Tensor::from_vec(data, s.dim(), &candle_core::Device::Cpu)?)
    };
    let (real, fake) = (to_tensor(scores_real)?, to_tensor(scores_fake)?);
    Ok((
        scalar(&discriminator_loss(&real, &fake)?)?,
        scalar(&generator_adv_loss(&fake)?)?,
    ))
}

/// Reads a rank-0 (or single-element) tensor as `f64`.
pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.flatten_all()?.to_dtype(candle_core::DType::F64)?.get(0)?.to_scalar::<f64>()?)
}
