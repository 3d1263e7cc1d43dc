//! Evaluation: SSIM, the tile-to-match comparison protocol, optional
//! backbone-based perceptual metrics, the inter-map consistency probe and
//! seam-gradient statistics.

use candle_core::{DType, Device, Tensor};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array2, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::FeatureExtractor;
use crate::net::Discriminator;
use crate::stack_io::{tile_stack, MapKind, TextureStack};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(window: usize, sigma: f64) -> Vec<f64> {
    let c = (window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable valid-mode filtering of a single plane.
fn filter_valid(plane: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = Array2::<f64>::zeros((h, ow));
    for y in 0..h {
        for x in 0..ow {
            rows[[y, x]] = taps.iter().enumerate().map(|(i, t)| t * plane[[y, x + i]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((oh, ow));
    for y in 0..oh {
        for x in 0..ow {
            out[[y, x]] = taps.iter().enumerate().map(|(i, t)| t * rows[[y + i, x]]).sum();
        }
    }
    out
}

fn ssim_plane(a: ArrayView2<f32>, b: ArrayView2<f32>, taps: &[f64]) -> f64 {
    let a = a.mapv(f64::from);
    let b = b.mapv(f64::from);
    let mu_a = filter_valid(&a, taps);
    let mu_b = filter_valid(&b, taps);
    let aa = filter_valid(&(&a * &a), taps);
    let bb = filter_valid(&(&b * &b), taps);
    let ab = filter_valid(&(&a * &b), taps);
    let mut total = 0.0;
    for (((&ma, &mb), (&saa, &sbb)), &sab) in mu_a.iter().zip(&mu_b).zip(aa.iter().zip(&bb)).zip(&ab) {
        let var_a = saa - ma * ma;
        let var_b = sbb - mb * mb;
        let cov = sab - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
    }
    total / mu_a.len() as f64
}

/// Mean SSIM over every valid `window x window` Gaussian window, averaged
/// over channels. Images are `H x W x C` with values in `[0, 1]`.
pub fn ssim_with_window(a: ArrayView3<f32>, b: ArrayView3<f32>, window: usize) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidConfig(format!("SSIM window {window} must be odd")));
    }
    let (h, w, c) = a.dim();
    if h < window || w < window || c == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{h}x{w}x{c} image is smaller than the {window}x{window} window"
        )));
    }
    let taps = gaussian_taps(window, SSIM_SIGMA);
    let per_channel: f64 = (0..c)
        .map(|ch| ssim_plane(a.index_axis(Axis(2), ch), b.index_axis(Axis(2), ch), &taps))
        .sum();
    Ok(per_channel / c as f64)
}

pub fn ssim(a: ArrayView3<f32>, b: ArrayView3<f32>) -> Result<f64> {
    ssim_with_window(a, b, SSIM_WINDOW)
}

/// Repeats `output` in both axes and keeps the top-left `height x width`.
pub fn tile_to_match(output: &TextureStack, height: usize, width: usize) -> Result<TextureStack> {
    let ny = height.div_ceil(output.height()).max(1);
    let nx = width.div_ceil(output.width()).max(1);
    tile_stack(output, ny, nx).crop_rect(0, 0, height, width)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Protocol {
    TiledToMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapScores {
    pub albedo: f64,
    pub normals: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean of the per-map SSIM values.
    pub ssim: f64,
    pub ssim_per_map: MapScores,
    pub lpips: Option<f64>,
    pub si_fid: Option<f64>,
    pub protocol: Protocol,
    pub notes: String,
}

/// Compares a synthesized stack with its exemplar after tiling the output
/// up to the exemplar's resolution. Perceptual metrics need a pretrained
/// backbone and are reported as unavailable otherwise.
pub fn compare_to_exemplar(
    output: &TextureStack,
    exemplar: &TextureStack,
    extractor: Option<&dyn FeatureExtractor>,
) -> Result<MetricReport> {
    let matched = tile_to_match(output, exemplar.height(), exemplar.width())?;
    let per_map = |kind: MapKind| ssim(matched.map(kind).view(), exemplar.map(kind).view());
    let ssim_per_map = MapScores {
        albedo: per_map(MapKind::Albedo)?,
        normals: per_map(MapKind::Normals)?,
    };
    let ssim = (ssim_per_map.albedo + ssim_per_map.normals) / 2.0;
    let (lpips, si_fid, notes) = match extractor.filter(|e| e.is_pretrained()) {
        Some(e) => {
            let mut lp = 0.0;
            let mut fid = 0.0;
            for kind in MapKind::ALL {
                let fa = e.features(&map_tensor(&matched, kind)?)?;
                let fb = e.features(&map_tensor(exemplar, kind)?)?;
                lp += perceptual_distance(&fa, &fb)? / 2.0;
                fid += frechet_distance(
                    fa.last().expect("extractor has layers"),
                    fb.last().expect("extractor has layers"),
                )? / 2.0;
            }
            (
                Some(lp),
                Some(fid),
                format!(
                    "perceptual metrics from {} (unit-normalized features, uniform channel weights; \
                     Frechet distance over deepest-layer spatial features)",
                    e.name()
                ),
            )
        }
        None => (
            None,
            None,
            "lpips and si_fid unavailable: no pretrained backbone loaded".to_string(),
        ),
    };
    Ok(MetricReport {
        ssim,
        ssim_per_map,
        lpips,
        si_fid,
        protocol: Protocol::TiledToMatch,
        notes,
    })
}

fn map_tensor(stack: &TextureStack, kind: MapKind) -> Result<Tensor> {
    let m = stack.map(kind);
    let (h, w, _) = m.dim();
    let data: Vec<f32> = (0..3).flat_map(|c| m.slice(s![.., .., c]).iter().copied().collect::<Vec<_>>()).collect();
    Ok(Tensor::from_vec(data, (1, 3, h, w), &Device::Cpu)?)
}

/// Per-layer spatial mean of squared differences between channel-unit-
/// normalized features, averaged over layers.
fn perceptual_distance(a: &[Tensor], b: &[Tensor]) -> Result<f64> {
    let mut total = 0.0;
    for (fa, fb) in a.iter().zip(b) {
        let unit = |t: &Tensor| -> Result<Tensor> {
            let norm = (t.sqr()?.sum_keepdim(1)?.sqrt()? + 1e-10)?;
            Ok(t.broadcast_div(&norm)?)
        };
        let d = (unit(fa)? - unit(fb)?)?.sqr()?.sum_keepdim(1)?.mean_all()?;
        total += d.to_dtype(DType::F64)?.to_scalar::<f64>()?;
    }
    Ok(total / a.len().max(1) as f64)
}

fn feature_moments(t: &Tensor) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (_, c, h, w) = t.dims4()?;
    let rows: Vec<Vec<f64>> = t.reshape((c, h * w))?.to_dtype(DType::F64)?.to_vec2()?;
    let n = (h * w) as f64;
    let mean: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let denom = (n - 1.0).max(1.0);
    let cov = DMatrix::from_fn(c, c, |i, j| {
        rows[i]
            .iter()
            .zip(&rows[j])
            .map(|(a, b)| (a - mean[i]) * (b - mean[j]))
            .sum::<f64>()
            / denom
    });
    Ok((mean, cov))
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Frechet distance between Gaussians fitted to the spatial feature
/// vectors of two `1 x C x H x W` maps.
pub fn frechet_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (mu_a, cov_a) = feature_moments(a)?;
    let (mu_b, cov_b) = feature_moments(b)?;
    if mu_a.len() != mu_b.len() {
        return Err(Error::ShapeMismatch("feature channel counts differ".into()));
    }
    let mean_term: f64 = mu_a.iter().zip(&mu_b).map(|(x, y)| (x - y).powi(2)).sum();
    let root_a = psd_sqrt(&cov_a);
    let middle = &root_a * &cov_b * &root_a;
    let middle = (&middle + middle.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(middle).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((mean_term + cov_a.trace() + cov_b.trace() - 2.0 * cross).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub shift: usize,
    pub mean_score: f64,
}

/// Mean discriminator score with the normals translated horizontally by
/// each shift (wrapping around) while the albedo stays fixed. The aligned
/// case is always the first row.
pub fn consistency_probe(discriminator: &Discriminator, stack: &TextureStack, shifts: &[usize]) -> Result<Vec<ProbeRow>> {
    let side = stack.min_side();
    if let Some(&bad) = shifts.iter().find(|&&s| s >= side) {
        return Err(Error::ShiftTooLarge { shift: bad, side });
    }
    let mut all = vec![0];
    all.extend(shifts.iter().copied().filter(|&s| s != 0));
    all.into_iter()
        .map(|shift| {
            let probe = stack.shift_normals(0, shift);
            Ok(ProbeRow {
                shift,
                mean_score: discriminator.discriminate(&probe)?.mean(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamStats {
    /// Largest absolute difference between neighbours on opposite sides of
    /// a tile boundary.
    pub max_seam_gradient: f64,
    /// Largest absolute difference between any other pair of neighbours.
    pub max_interior_gradient: f64,
}

impl SeamStats {
    pub fn ratio(&self) -> f64 {
        self.max_seam_gradient / self.max_interior_gradient.max(f64::MIN_POSITIVE)
    }

    /// True when no seam step exceeds `factor` times the interior maximum.
    pub fn is_closed(&self, factor: f64) -> bool {
        self.max_seam_gradient <= factor * self.max_interior_gradient
    }
}

/// Neighbour-difference statistics of an image assembled from
/// `tile_h x tile_w` tiles. Differences are taken per channel.
pub fn seam_gradients(image: ArrayView3<f32>, tile_h: usize, tile_w: usize) -> SeamStats {
    let (h, w, c) = image.dim();
    let mut seam = 0.0f64;
    let mut interior = 0.0f64;
    let mut record = |is_seam: bool, d: f64| {
        if is_seam {
            seam = seam.max(d);
        } else {
            interior = interior.max(d);
        }
    };
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let v = image[[y, x, ch]] as f64;
                if x + 1 < w {
                    record((x + 1) % tile_w == 0, (image[[y, x + 1, ch]] as f64 - v).abs());
                }
                if y + 1 < h {
                    record((y + 1) % tile_h == 0, (image[[y + 1, x, ch]] as f64 - v).abs());
                }
            }
        }
    }
    SeamStats {
        max_seam_gradient: seam,
        max_interior_gradient: interior,
    }
}

/// Seam statistics of `tile` repeated 2x2, for one map.
pub fn seam_closure(tile: &TextureStack, kind: MapKind) -> Result<SeamStats> {
    let tiled = tile_stack(tile, 2, 2);
    Ok(seam_gradients(tiled.map(kind).view(), tile.height(), tile.width()))
}
