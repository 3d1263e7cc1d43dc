//! Texture stacks (albedo + normals), crops, tiling and PNG I/O.
//!
//! Both maps are stored as `H x W x 3` arrays of `f32` in `[0, 1]`. Normals
//! keep their on-disk encoding (`n = 2v - 1`); nothing here decodes them.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageReader, Rgb};
use ndarray::{s, Array3, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel-aligned albedo and normal maps of identical size.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureStack {
    albedo: Array3<f32>,
    normals: Array3<f32>,
}

/// Square crop window in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropSpec {
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// Which map of a stack an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Albedo,
    Normals,
}

impl MapKind {
    pub const ALL: [MapKind; 2] = [MapKind::Albedo, MapKind::Normals];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::Albedo => "albedo",
            MapKind::Normals => "normals",
        }
    }
}

impl TextureStack {
    /// Builds a stack from two `H x W x 3` arrays, validating shape and range.
    pub fn new(albedo: Array3<f32>, normals: Array3<f32>) -> Result<Self> {
        let (ah, aw, ac) = albedo.dim();
        let (nh, nw, nc) = normals.dim();
        if ac != 3 || nc != 3 {
            return Err(Error::ShapeMismatch(format!(
                "maps must have 3 channels, got {ac} and {nc}"
            )));
        }
        if (ah, aw) != (nh, nw) {
            return Err(Error::DimensionMismatch {
                albedo_h: ah,
                albedo_w: aw,
                normals_h: nh,
                normals_w: nw,
            });
        }
        if ah == 0 || aw == 0 {
            return Err(Error::DegenerateCrop(format!("empty stack {ah}x{aw}")));
        }
        let in_range = |a: &Array3<f32>| a.iter().all(|v| (0.0..=1.0).contains(v));
        if !in_range(&albedo) || !in_range(&normals) {
            return Err(Error::ShapeMismatch(
                "channel values must lie in [0, 1]".to_string(),
            ));
        }
        Ok(Self { albedo, normals })
    }

    /// Builds a stack by evaluating `f(y, x) -> (albedo rgb, normals rgb)` per pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> ([f32; 3], [f32; 3]),
    ) -> Result<Self> {
        let mut albedo = Array3::zeros((height, width, 3));
        let mut normals = Array3::zeros((height, width, 3));
        for y in 0..height {
            for x in 0..width {
                let (a, n) = f(y, x);
                for c in 0..3 {
                    albedo[[y, x, c]] = a[c];
                    normals[[y, x, c]] = n[c];
                }
            }
        }
        Self::new(albedo, normals)
    }

    pub(crate) fn from_parts_unchecked(albedo: Array3<f32>, normals: Array3<f32>) -> Self {
        debug_assert_eq!(albedo.dim(), normals.dim());
        Self { albedo, normals }
    }

    pub fn height(&self) -> usize {
        self.albedo.dim().0
    }

    pub fn width(&self) -> usize {
        self.albedo.dim().1
    }

    pub fn min_side(&self) -> usize {
        self.height().min(self.width())
    }

    pub fn albedo(&self) -> &Array3<f32> {
        &self.albedo
    }

    pub fn normals(&self) -> &Array3<f32> {
        &self.normals
    }

    pub fn map(&self, kind: MapKind) -> &Array3<f32> {
        match kind {
            MapKind::Albedo => &self.albedo,
            MapKind::Normals => &self.normals,
        }
    }

    pub fn into_maps(self) -> (Array3<f32>, Array3<f32>) {
        (self.albedo, self.normals)
    }

    /// Cuts the same window out of both maps.
    pub fn crop(&self, spec: CropSpec) -> Result<Self> {
        self.crop_rect(spec.top, spec.left, spec.size, spec.size)
    }

    pub fn crop_rect(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::DegenerateCrop(format!("{height}x{width} window")));
        }
        if top + height > self.height() || left + width > self.width() {
            return Err(Error::CropTooLarge {
                size: height.max(width),
                height: self.height(),
                width: self.width(),
            });
        }
        let window = s![top..top + height, left..left + width, ..];
        Ok(Self {
            albedo: self.albedo.slice(window).to_owned(),
            normals: self.normals.slice(window).to_owned(),
        })
    }

    /// Translates the normal map by `(dy, dx)` pixels with wraparound, leaving
    /// the albedo in place.
    pub fn shift_normals(&self, dy: usize, dx: usize) -> Self {
        let normals = roll(&self.normals.view(), dy, dx);
        Self {
            albedo: self.albedo.clone(),
            normals,
        }
    }
}

fn roll(src: &ArrayView3<f32>, dy: usize, dx: usize) -> Array3<f32> {
    let (h, w, c) = src.dim();
    Array3::from_shape_fn((h, w, c), |(y, x, ch)| {
        src[[(y + h - dy % h) % h, (x + w - dx % w) % w, ch]]
    })
}

/// Draws a uniformly placed `size x size` crop, identical in both maps.
pub fn random_crop(stack: &TextureStack, size: usize, seed: u64) -> Result<(TextureStack, CropSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_crop_with(stack, size, &mut rng)
}

pub fn random_crop_with<R: Rng + ?Sized>(
    stack: &TextureStack,
    size: usize,
    rng: &mut R,
) -> Result<(TextureStack, CropSpec)> {
    let spec = random_crop_spec(stack.height(), stack.width(), size, rng)?;
    Ok((stack.crop(spec)?, spec))
}

pub fn random_crop_spec<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    size: usize,
    rng: &mut R,
) -> Result<CropSpec> {
    if size == 0 {
        return Err(Error::DegenerateCrop("crop side 0".to_string()));
    }
    if size > height.min(width) {
        return Err(Error::CropTooLarge {
            size,
            height,
            width,
        });
    }
    let top = rng.random_range(0..=height - size);
    let left = rng.random_range(0..=width - size);
    Ok(CropSpec { top, left, size })
}

/// Centered crop keeping `floor(fraction * side)` pixels per dimension.
pub fn center_crop(stack: &TextureStack, fraction: f64) -> Result<TextureStack> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::DegenerateCrop(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    let (h, w) = (stack.height(), stack.width());
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    let side = |n: usize| (fraction * n as f64 + 1e-9).floor() as usize;
    let (ch, cw) = (side(h), side(w));
    if ch < 1 || cw < 1 {
        return Err(Error::DegenerateCrop(format!(
            "fraction {fraction} of {h}x{w} leaves {ch}x{cw}"
        )));
    }
    stack.crop_rect((h - ch) / 2, (w - cw) / 2, ch, cw)
}

/// Repeats the stack `ny` times vertically and `nx` times horizontally.
pub fn tile_stack(stack: &TextureStack, ny: usize, nx: usize) -> TextureStack {
    assert!(ny >= 1 && nx >= 1, "tile counts must be positive");
    TextureStack {
        albedo: tile_map(&stack.albedo.view(), ny, nx),
        normals: tile_map(&stack.normals.view(), ny, nx),
    }
}

pub(crate) fn tile_map(map: &ArrayView3<f32>, ny: usize, nx: usize) -> Array3<f32> {
    let rows: Vec<_> = std::iter::repeat_n(map.view(), nx).collect();
    let row = ndarray::concatenate(Axis(1), &rows).expect("equal heights");
    let cols: Vec<_> = std::iter::repeat_n(row.view(), ny).collect();
    ndarray::concatenate(Axis(0), &cols).expect("equal widths")
}

/// `<prefix>_albedo.png` and `<prefix>_normals.png`.
pub fn stack_paths(prefix: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let prefix = prefix.as_ref().to_string_lossy().into_owned();
    (
        PathBuf::from(format!("{prefix}_albedo.png")),
        PathBuf::from(format!("{prefix}_normals.png")),
    )
}

pub fn load_stack(albedo_path: impl AsRef<Path>, normals_path: impl AsRef<Path>) -> Result<TextureStack> {
    let albedo = load_map(albedo_path.as_ref())?;
    let normals = load_map(normals_path.as_ref())?;
    TextureStack::new(albedo, normals)
}

pub fn load_named(prefix: impl AsRef<Path>) -> Result<TextureStack> {
    let (a, n) = stack_paths(prefix);
    load_stack(a, n)
}

pub fn save_stack(
    stack: &TextureStack,
    albedo_path: impl AsRef<Path>,
    normals_path: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<()> {
    save_map(&stack.albedo.view(), albedo_path.as_ref(), depth)?;
    save_map(&stack.normals.view(), normals_path.as_ref(), depth)
}

pub fn save_named(stack: &TextureStack, prefix: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let (a, n) = stack_paths(prefix);
    save_stack(stack, a, n, depth)
}

/// Reads an 8- or 16-bit PNG into `H x W x 3` values in `[0, 1]`.
pub fn load_map(path: &Path) -> Result<Array3<f32>> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let unsupported = |reason: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)?
        .with_guessed_format()
        .map_err(|e| unsupported(e.to_string()))?;
    match reader.format() {
        Some(image::ImageFormat::Png) => {}
        other => return Err(unsupported(format!("expected PNG, found {other:?}"))),
    }
    let img = reader.decode().map_err(|e| unsupported(e.to_string()))?;
    let sixteen_bit = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = if sixteen_bit {
        img.to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 65535.0)
            .collect()
    } else {
        img.to_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 255.0)
            .collect()
    };
    Ok(Array3::from_shape_vec((h, w, 3), data).expect("decoded buffer is H*W*3"))
}

pub fn save_map(map: &ArrayView3<f32>, path: &Path, depth: BitDepth) -> Result<()> {
    let (h, w, c) = map.dim();
    assert_eq!(c, 3, "maps are RGB");
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let quantize = |v: f32, max: f32| (v.clamp(0.0, 1.0) * max).round();
    let result = match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = map.iter().map(|&v| quantize(v, 255.0) as u8).collect();
            ImageBuffer::<Rgb<u8>, _>::from_raw(w as u32, h as u32, raw)
                .expect("buffer sized H*W*3")
                .save(path)
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = map.iter().map(|&v| quantize(v, 65535.0) as u16).collect();
            ImageBuffer::<Rgb<u16>, _>::from_raw(w as u32, h as u32, raw)
                .expect("buffer sized H*W*3")
                .save(path)
        }
    };
    result.map_err(|e| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
