//! Discriminator-guided tileability test.
//!
//! The candidate's discriminator map is split into a centered vertical band,
//! a centered horizontal band (the latent seam locations) and the remaining
//! cells. The candidate is tileable when the worst score inside each band is
//! at least `gamma` times the worst score elsewhere.

use std::ops::Range;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Discriminator, ProbabilityMap};
use crate::stack_io::TextureStack;

/// Smallest map side for which both bands and the remainder are non-empty.
pub const MIN_MAP_SIDE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TileabilityConfig {
    /// Band width as a fraction of the map side.
    pub band_fraction: f64,
    /// Sensitivity; `0` accepts everything.
    pub gamma: f64,
}

impl Default for TileabilityConfig {
    fn default() -> Self {
        Self {
            band_fraction: 0.2,
            gamma: 1.0,
        }
    }
}

impl TileabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "band_fraction {} must lie in (0, 1)",
                self.band_fraction
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma {} must be finite and >= 0", self.gamma)));
        }
        Ok(())
    }
}

/// Geometry of the two centered bands on an `height x width` map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bands {
    pub height: usize,
    pub width: usize,
    /// Columns of the vertical band (spans all rows).
    pub columns: Range<usize>,
    /// Rows of the horizontal band (spans all columns).
    pub rows: Range<usize>,
}

impl Bands {
    pub fn in_vertical(&self, y: usize, x: usize) -> bool {
        y < self.height && self.columns.contains(&x)
    }

    pub fn in_horizontal(&self, y: usize, x: usize) -> bool {
        x < self.width && self.rows.contains(&y)
    }

    pub fn in_rest(&self, y: usize, x: usize) -> bool {
        y < self.height && x < self.width && !self.columns.contains(&x) && !self.rows.contains(&y)
    }

    fn cells(&self, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (y, x)))
            .filter(|&(y, x)| keep(y, x))
            .collect()
    }

    /// `s_v` as `(row, column)` cells.
    pub fn vertical_cells(&self) -> Vec<(usize, usize)> {
        self.cells(|y, x| self.in_vertical(y, x))
    }

    /// `s_h` as `(row, column)` cells.
    pub fn horizontal_cells(&self) -> Vec<(usize, usize)> {
        self.cells(|y, x| self.in_horizontal(y, x))
    }

    /// Cells outside both bands.
    pub fn rest_cells(&self) -> Vec<(usize, usize)> {
        self.cells(|y, x| self.in_rest(y, x))
    }
}

fn centered_band(side: usize, fraction: f64) -> Range<usize> {
    let width = (fraction * side as f64).round() as usize;
    let start = side.saturating_sub(width) / 2;
    start..start + width
}

/// Band layout for a map of the given size.
pub fn band_layout(height: usize, width: usize, band_fraction: f64) -> Result<Bands> {
    let too_small = || Error::MapTooSmall {
        height,
        width,
        band_fraction,
    };
    if height < MIN_MAP_SIDE || width < MIN_MAP_SIDE {
        return Err(too_small());
    }
    let columns = centered_band(width, band_fraction);
    let rows = centered_band(height, band_fraction);
    if columns.is_empty() || rows.is_empty() || columns.len() >= width || rows.len() >= height {
        return Err(too_small());
    }
    Ok(Bands {
        height,
        width,
        columns,
        rows,
    })
}

/// `(s_v, s_h, s_r)` for `map`.
pub fn extract_bands(map: &ProbabilityMap, band_fraction: f64) -> Result<Bands> {
    band_layout(map.height(), map.width(), band_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileabilityVerdict {
    pub tileable: bool,
    /// Worst score in the vertical band.
    pub m_v: f64,
    /// Worst score in the horizontal band.
    pub m_h: f64,
    /// Worst score outside the bands.
    pub m_d: f64,
    pub tau: f64,
    pub map: ProbabilityMap,
}

pub fn is_tileable(map: &ProbabilityMap, config: &TileabilityConfig) -> Result<TileabilityVerdict> {
    config.validate()?;
    let bands = extract_bands(map, config.band_fraction)?;
    let scores = map.scores();
    let (mut m_v, mut m_h, mut m_d) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for ((y, x), &s) in scores.indexed_iter() {
        let s = s as f64;
        if bands.in_vertical(y, x) {
            m_v = m_v.min(s);
        }
        if bands.in_horizontal(y, x) {
            m_h = m_h.min(s);
        }
        if bands.in_rest(y, x) {
            m_d = m_d.min(s);
        }
    }
    let tau = config.gamma * m_d;
    Ok(TileabilityVerdict {
        tileable: m_v >= tau && m_h >= tau,
        m_v,
        m_h,
        m_d,
        tau,
        map: map.clone(),
    })
}

/// Runs the discriminator on a candidate tile and applies [`is_tileable`].
pub fn evaluate_candidate(
    discriminator: &Discriminator,
    candidate: &TextureStack,
    config: &TileabilityConfig,
) -> Result<TileabilityVerdict> {
    config.validate()?;
    let map = discriminator.discriminate(candidate)?;
    is_tileable(&map, config)
}

/// Writes the probability map as a grayscale PNG, each cell enlarged to
/// `cell_px` pixels, with the band outlines drawn in red.
pub fn save_heatmap(map: &ProbabilityMap, band_fraction: f64, cell_px: usize, path: impl AsRef<Path>) -> Result<()> {
    let cell = cell_px.max(1);
    let (h, w) = (map.height(), map.width());
    let mut img = RgbImage::new((w * cell) as u32, (h * cell) as u32);
    for ((y, x), &s) in map.scores().indexed_iter() {
        let v = (s.clamp(0.0, 1.0) * 255.0).round() as u8;
        for py in y * cell..(y + 1) * cell {
            for px in x * cell..(x + 1) * cell {
                img.put_pixel(px as u32, py as u32, Rgb([v, v, v]));
            }
        }
    }
    if let Ok(bands) = band_layout(h, w, band_fraction) {
        let red = Rgb([255, 0, 0]);
        let (ih, iw) = (h * cell, w * cell);
        for x in [bands.columns.start * cell, bands.columns.end * cell - 1] {
            for y in 0..ih {
                img.put_pixel(x as u32, y as u32, red);
            }
        }
        for y in [bands.rows.start * cell, bands.rows.end * cell - 1] {
            for x in 0..iw {
                img.put_pixel(x as u32, y as u32, red);
            }
        }
    }
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    img.save(path).map_err(|e| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
