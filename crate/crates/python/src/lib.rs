//! Python bindings: texture stacks, networks, training, sampling, and metrics.

use std::sync::Arc;

use numpy::{IntoPyArray, PyArray2, PyArray3, PyReadonlyArray2, PyReadonlyArray3};
use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tilesynth_core::losses::{ConvExtractor, FeatureExtractor};
use tilesynth_core::metrics;
use tilesynth_core::net::checkpoint::{load_checkpoint, save_checkpoint};
use tilesynth_core::net::{
    DecoderMode, Discriminator as CoreDiscriminator, DiscriminatorConfig, Generator as CoreGenerator, GeneratorConfig,
    ProbabilityMap,
};
use tilesynth_core::sampler::{sample_textures, GanPipeline, SamplerConfig};
use tilesynth_core::stack_io::{self, BitDepth};
use tilesynth_core::tileability::{self, TileabilityConfig};
use tilesynth_core::trainer::{self, AblationMask, TrainConfig};
use tilesynth_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::FileMissing(p) => PyFileNotFoundError::new_err(p.display().to_string()),
        Error::Io(_) | Error::Tensor(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Pixel-aligned albedo and normal maps, each `H x W x 3` in `[0, 1]`.
#[pyclass(module = "tilesynth")]
#[derive(Clone)]
struct TextureStack {
    inner: tilesynth_core::TextureStack,
}

#[pymethods]
impl TextureStack {
    #[new]
    fn new(albedo: PyReadonlyArray3<f32>, normals: PyReadonlyArray3<f32>) -> PyResult<Self> {
        let inner = tilesynth_core::TextureStack::new(albedo.as_array().to_owned(), normals.as_array().to_owned())
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads `<prefix>_albedo.png` and `<prefix>_normals.png`, or an explicit pair.
    #[staticmethod]
    #[pyo3(signature = (albedo_or_prefix, normals=None))]
    fn load(albedo_or_prefix: &str, normals: Option<&str>) -> PyResult<Self> {
        let inner = match normals {
            Some(n) => stack_io::load_stack(albedo_or_prefix, n),
            None => stack_io::load_named(albedo_or_prefix),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (prefix, sixteen_bit=false))]
    fn save(&self, prefix: &str, sixteen_bit: bool) -> PyResult<()> {
        let depth = if sixteen_bit { BitDepth::Sixteen } else { BitDepth::Eight };
        stack_io::save_named(&self.inner, prefix, depth).map_err(to_py)
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn albedo<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray3<f32>> {
        self.inner.albedo().clone().into_pyarray(py)
    }

    fn normals<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray3<f32>> {
        self.inner.normals().clone().into_pyarray(py)
    }

    fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> PyResult<Self> {
        let inner = self.inner.crop_rect(top, left, height, width).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn tile(&self, ny: usize, nx: usize) -> Self {
        Self {
            inner: stack_io::tile_stack(&self.inner, ny, nx),
        }
    }

    fn shift_normals(&self, dy: usize, dx: usize) -> Self {
        Self {
            inner: self.inner.shift_normals(dy, dx),
        }
    }

    fn __repr__(&self) -> String {
        format!("TextureStack({}x{})", self.inner.height(), self.inner.width())
    }
}

fn decoder_mode(name: &str) -> PyResult<DecoderMode> {
    match name {
        "split" => Ok(DecoderMode::Split),
        "joint" => Ok(DecoderMode::Joint),
        other => Err(PyValueError::new_err(format!("unknown decoder mode {other:?}"))),
    }
}

#[pyclass(module = "tilesynth")]
struct Generator {
    inner: CoreGenerator,
}

#[pymethods]
impl Generator {
    #[new]
    #[pyo3(signature = (input_size=128, base_channels=64, residual_blocks=5, decoder="split", seed=0))]
    fn new(input_size: usize, base_channels: usize, residual_blocks: usize, decoder: &str, seed: u64) -> PyResult<Self> {
        let config = GeneratorConfig {
            input_size,
            base_channels,
            num_residual_blocks: residual_blocks,
            decoder_mode: decoder_mode(decoder)?,
            ..GeneratorConfig::default()
        };
        Ok(Self {
            inner: CoreGenerator::build(config, seed).map_err(to_py)?,
        })
    }

    /// Expands a `k x k` stack to `2k x 2k`.
    fn forward(&self, py: Python<'_>, stack: &TextureStack) -> PyResult<TextureStack> {
        let out = py.detach(|| self.inner.forward(&stack.inner)).map_err(to_py)?;
        Ok(TextureStack { inner: out })
    }

    /// Returns `(pre_crop, tileable)` from the 2x2-tiled latent field.
    #[pyo3(signature = (stack, split_level=None))]
    fn generate_seamless(
        &self,
        py: Python<'_>,
        stack: &TextureStack,
        split_level: Option<usize>,
    ) -> PyResult<(TextureStack, TextureStack)> {
        let level = split_level.unwrap_or(self.inner.config().split_level);
        let (pre, tile) = py
            .detach(|| self.inner.generate_seamless(&stack.inner, level))
            .map_err(to_py)?;
        Ok((TextureStack { inner: pre }, TextureStack { inner: tile }))
    }
}

#[pyclass(module = "tilesynth")]
struct Discriminator {
    inner: CoreDiscriminator,
}

#[pymethods]
impl Discriminator {
    #[new]
    #[pyo3(signature = (base_channels=64, seed=1))]
    fn new(base_channels: usize, seed: u64) -> PyResult<Self> {
        let config = DiscriminatorConfig {
            base_channels,
            ..DiscriminatorConfig::default()
        };
        Ok(Self {
            inner: CoreDiscriminator::build(config, seed).map_err(to_py)?,
        })
    }

    /// Per-patch realness probabilities as a 2-D array.
    fn discriminate<'py>(&self, py: Python<'py>, stack: &TextureStack) -> PyResult<Bound<'py, PyArray2<f32>>> {
        let map = py.detach(|| self.inner.discriminate(&stack.inner)).map_err(to_py)?;
        Ok(map.scores().clone().into_pyarray(py))
    }

    #[getter]
    fn downsample_factor(&self) -> usize {
        self.inner.downsample_factor()
    }
}

#[pyfunction]
fn load_models(path: &str) -> PyResult<(Generator, Discriminator)> {
    let (g, d, _) = load_checkpoint(path).map_err(to_py)?;
    Ok((Generator { inner: g }, Discriminator { inner: d }))
}

#[pyfunction]
#[pyo3(signature = (path, generator, discriminator, iteration=0))]
fn save_models(path: &str, generator: &Generator, discriminator: &Discriminator, iteration: usize) -> PyResult<()> {
    save_checkpoint(path, &generator.inner, &discriminator.inner, iteration, f64::INFINITY).map_err(to_py)
}

/// Applies the band quality test to a discriminator map.
#[pyfunction]
#[pyo3(signature = (scores, gamma=1.0, band_fraction=0.2, downsample_factor=8))]
fn is_tileable<'py>(
    py: Python<'py>,
    scores: PyReadonlyArray2<f32>,
    gamma: f64,
    band_fraction: f64,
    downsample_factor: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let map = ProbabilityMap::new(scores.as_array().to_owned(), downsample_factor).map_err(to_py)?;
    let v = tileability::is_tileable(&map, &TileabilityConfig { band_fraction, gamma }).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("tileable", v.tileable)?;
    out.set_item("m_v", v.m_v)?;
    out.set_item("m_h", v.m_h)?;
    out.set_item("m_d", v.m_d)?;
    out.set_item("tau", v.tau)?;
    Ok(out)
}

#[pyfunction]
fn ssim(a: PyReadonlyArray3<f32>, b: PyReadonlyArray3<f32>) -> PyResult<f64> {
    metrics::ssim(a.as_array(), b.as_array()).map_err(to_py)
}

/// SSIM per map after tiling `output` to the exemplar size.
#[pyfunction]
fn compare<'py>(py: Python<'py>, output: &TextureStack, exemplar: &TextureStack) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::compare_to_exemplar(&output.inner, &exemplar.inner, None).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("ssim", r.ssim)?;
    out.set_item("ssim_albedo", r.ssim_per_map.albedo)?;
    out.set_item("ssim_normals", r.ssim_per_map.normals)?;
    out.set_item("notes", r.notes)?;
    Ok(out)
}

#[pyfunction]
fn consistency_probe(discriminator: &Discriminator, stack: &TextureStack, shifts: Vec<usize>) -> PyResult<Vec<(usize, f64)>> {
    let rows = metrics::consistency_probe(&discriminator.inner, &stack.inner, &shifts).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.shift, r.mean_score)).collect())
}

/// Trains on an exemplar and returns `(generator, discriminator, best_iteration)`.
#[pyfunction]
#[pyo3(signature = (
    stack, iterations=50000, k=128, seed=0, base_channels=64, residual_blocks=5,
    disc_channels=64, decoder="split", eval_interval=500, ablate=Vec::new()
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    stack: &TextureStack,
    iterations: usize,
    k: usize,
    seed: u64,
    base_channels: usize,
    residual_blocks: usize,
    disc_channels: usize,
    decoder: &str,
    eval_interval: usize,
    ablate: Vec<String>,
) -> PyResult<(Generator, Discriminator, usize)> {
    let mut cfg = TrainConfig {
        k,
        iterations,
        seed,
        eval_interval,
        ..TrainConfig::default()
    };
    cfg.generator.base_channels = base_channels;
    cfg.generator.num_residual_blocks = residual_blocks;
    cfg.generator.decoder_mode = decoder_mode(decoder)?;
    cfg.discriminator.base_channels = disc_channels;
    let terms = ablate
        .iter()
        .map(|t| t.parse().map_err(|e: Error| PyValueError::new_err(e.to_string())))
        .collect::<PyResult<Vec<_>>>()?;
    cfg.ablation = AblationMask::without(&terms);
    let extractor: Arc<dyn FeatureExtractor> = Arc::new(ConvExtractor::from_env_or_random(seed));
    let outcome = py
        .detach(|| trainer::train(&stack.inner, cfg, extractor))
        .map_err(to_py)?;
    let best = outcome.best;
    Ok((
        Generator {
            inner: best.models.generator,
        },
        Discriminator {
            inner: best.models.discriminator,
        },
        best.iteration,
    ))
}

/// Searches crops from large to small for tileable outputs. Returns a list of
/// `(tile, crop_side, top, left)` and the stop reason.
#[pyfunction]
#[pyo3(signature = (
    stack, generator, discriminator, n=1, c_min=100, c_max=None, m=3, size_step=1,
    seed=0, gamma=1.0, band_fraction=0.2, max_candidates=None
))]
#[allow(clippy::too_many_arguments)]
fn sample(
    py: Python<'_>,
    stack: &TextureStack,
    generator: &Generator,
    discriminator: &Discriminator,
    n: usize,
    c_min: usize,
    c_max: Option<usize>,
    m: usize,
    size_step: usize,
    seed: u64,
    gamma: f64,
    band_fraction: f64,
    max_candidates: Option<usize>,
) -> PyResult<(Vec<(TextureStack, usize, usize, usize)>, String)> {
    let cfg = SamplerConfig {
        n,
        c_min,
        c_max,
        m,
        size_step,
        seed,
        max_candidates,
        parallel: false,
    };
    let pipeline = GanPipeline::new(&generator.inner, &discriminator.inner, TileabilityConfig { band_fraction, gamma });
    let report = py
        .detach(|| sample_textures(&stack.inner, &pipeline, &cfg))
        .map_err(to_py)?;
    let reason = format!("{:?}", report.stopped_reason);
    let tiles = report
        .accepted
        .into_iter()
        .map(|a| (TextureStack { inner: a.tile }, a.source.size, a.source.top, a.source.left))
        .collect();
    Ok((tiles, reason))
}

#[pymodule]
fn tilesynth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TextureStack>()?;
    m.add_class::<Generator>()?;
    m.add_class::<Discriminator>()?;
    m.add_function(wrap_pyfunction!(load_models, m)?)?;
    m.add_function(wrap_pyfunction!(save_models, m)?)?;
    m.add_function(wrap_pyfunction!(is_tileable, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_probe, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}
