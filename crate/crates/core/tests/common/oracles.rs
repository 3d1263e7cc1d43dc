//! Direct loop implementations used as reference values.

use candle_core::{DType, Device, Tensor};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilesynth_core::losses::{FeatureExtractor, LossWeights};
use tilesynth_core::net::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Track};
use tilesynth_core::trainer::{generator_objective, AblationMask};

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> (Vec<f64>, Tensor) {
    let n: usize = dims.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let t = Tensor::from_vec(data.clone(), dims, &Device::Cpu).unwrap();
    (data, t)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Gram matrix of a `c x h x w` buffer, normalized by `h * w * c`.
pub fn gram(f: &[f64], c: usize, h: usize, w: usize) -> Vec<Vec<f64>> {
    let hw = h * w;
    let mut g = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in 0..c {
            let mut s = 0.0;
            for p in 0..hw {
                s += f[i * hw + p] * f[j * hw + p];
            }
            g[i][j] = s / (hw * c) as f64;
        }
    }
    g
}

fn mean_clamped_log(v: &[f64]) -> f64 {
    v.iter().map(|&p| p.clamp(1e-8, 1.0).ln()).sum::<f64>() / v.len() as f64
}

pub fn d_loss(real: &[f64], fake: &[f64]) -> f64 {
    let one_minus: Vec<f64> = fake.iter().map(|p| 1.0 - p).collect();
    -mean_clamped_log(real) - mean_clamped_log(&one_minus)
}

pub fn g_adv_loss(fake: &[f64]) -> f64 {
    -mean_clamped_log(fake)
}

/// SSIM evaluated window by window with a 2-D Gaussian kernel.
pub fn ssim(a: &Array3<f32>, b: &Array3<f32>) -> f64 {
    let (h, w, ch) = a.dim();
    let win = 11usize;
    let sigma = 1.5f64;
    let mut kernel = vec![vec![0.0f64; win]; win];
    let mut sum = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, k) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *k = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            sum += *k;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    for c in 0..ch {
        let mut acc = 0.0;
        let mut count = 0usize;
        for y in 0..=h - win {
            for x in 0..=w - win {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..win {
                    for j in 0..win {
                        let k = kernel[i][j] / sum;
                        let va = a[[y + i, x + j, c]] as f64;
                        let vb = b[[y + i, x + j, c]] as f64;
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    total / ch as f64
}

/// Result of comparing analytic and central-difference gradients.
pub struct GradCheck {
    pub checked: usize,
    pub worst_relative: f64,
}

/// Central-difference check of the full generator objective on a tiny f64
/// network, over `samples` randomly chosen weight entries.
pub fn generator_gradient_check(extractor: &dyn FeatureExtractor, samples: usize, step: f64) -> GradCheck {
    let dev = Device::Cpu;
    let k = 36;
    let g = Generator::build_on(
        GeneratorConfig {
            input_size: k,
            base_channels: 2,
            num_residual_blocks: 1,
            ..GeneratorConfig::default()
        },
        3,
        DType::F64,
        &dev,
    )
    .unwrap();
    let d = Discriminator::build_on(
        DiscriminatorConfig {
            base_channels: 2,
            ..Default::default()
        },
        4,
        DType::F64,
        &dev,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (_, source) = random_tensor(&mut rng, &[1, 6, k, k]);
    let (_, target) = random_tensor(&mut rng, &[1, 6, 2 * k, 2 * k]);
    let weights = LossWeights::default();
    let mask = AblationMask::default();
    let objective = |track: Track| -> Tensor {
        let fake = g.forward_tensor(&source, track).unwrap();
        generator_objective(&fake, &target, &d, extractor, &weights, &mask)
            .unwrap()
            .0
            .expect("all terms enabled")
    };
    let grads = objective(Track::Grad).backward().unwrap();
    let vars = g.named_vars();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut attempts = 0;
    while checked < samples && attempts < samples * 20 {
        attempts += 1;
        let (_, var) = &vars[rng.random_range(0..vars.len())];
        let n = var.elem_count();
        let idx = rng.random_range(0..n);
        let analytic: Vec<f64> = grads.get(var.as_tensor()).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        let analytic = analytic[idx];
        let original: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        let eval_at = |delta: f64| -> f64 {
            let mut v = original.clone();
            v[idx] += delta;
            var.set(&Tensor::from_vec(v, var.dims(), &dev).unwrap()).unwrap();
            objective(Track::NoGrad).to_scalar::<f64>().unwrap()
        };
        let numeric = (eval_at(step) - eval_at(-step)) / (2.0 * step);
        var.set(&Tensor::from_vec(original, var.dims(), &dev).unwrap()).unwrap();
        let scale = analytic.abs().max(numeric.abs());
        if scale < 1e-6 {
            continue;
        }
        worst = worst.max((analytic - numeric).abs() / scale);
        checked += 1;
    }
    GradCheck {
        checked,
        worst_relative: worst,
    }
}
