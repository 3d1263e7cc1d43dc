//! Decreasing-crop-size search for tileable outputs.
//!
//! Starting at the largest crop side, `m` random input crops are drawn per
//! side, each is expanded into a tileable candidate and judged by the
//! discriminator. The search stops once `n` candidates are accepted, the
//! sides run out, or the global candidate cap is reached.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Discriminator, Generator};
use crate::stack_io::{random_crop_spec, CropSpec, TextureStack};
use crate::tileability::{evaluate_candidate, TileabilityConfig, TileabilityVerdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Number of tiles wanted.
    pub n: usize,
    pub c_min: usize,
    /// Largest crop side; the input's shorter side when unset.
    pub c_max: Option<usize>,
    /// Crops drawn per side.
    pub m: usize,
    pub size_step: usize,
    pub seed: u64,
    /// Global cap on evaluated candidates.
    pub max_candidates: Option<usize>,
    /// Evaluate the crops of one side concurrently.
    pub parallel: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n: 1,
            c_min: 100,
            c_max: None,
            m: 3,
            size_step: 1,
            seed: 0,
            max_candidates: None,
            parallel: false,
        }
    }
}

impl SamplerConfig {
    /// Resolves `c_max` against the input and checks the search range.
    pub fn resolve_range(&self, stack: &TextureStack) -> Result<(usize, usize)> {
        if self.n == 0 || self.m == 0 || self.size_step == 0 {
            return Err(Error::InvalidConfig("n, m and size_step must be >= 1".into()));
        }
        let side = stack.min_side();
        let c_max = self.c_max.unwrap_or(side);
        if self.c_min < 4 {
            return Err(Error::CropRangeInvalid(format!("c_min = {} must be >= 4", self.c_min)));
        }
        if self.c_min > c_max {
            return Err(Error::CropRangeInvalid(format!(
                "c_min = {} exceeds c_max = {c_max}",
                self.c_min
            )));
        }
        if c_max > side {
            return Err(Error::CropRangeInvalid(format!(
                "c_max = {c_max} exceeds the input's shorter side {side}"
            )));
        }
        Ok((self.c_min, c_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    FoundN,
    Exhausted,
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// Nominal search side `c`.
    pub level: usize,
    /// Input window; its side is `level` rounded down to a multiple of 4.
    pub crop: CropSpec,
    pub verdict: TileabilityVerdict,
}

#[derive(Debug, Clone)]
pub struct AcceptedTile {
    pub tile: TextureStack,
    pub source: CropSpec,
    /// Index into [`SamplerReport::attempts`].
    pub attempt: usize,
}

#[derive(Debug, Clone)]
pub struct SamplerReport {
    pub attempts: Vec<Attempt>,
    pub accepted: Vec<AcceptedTile>,
    pub stopped_reason: StopReason,
}

/// Serializable form of a [`SamplerReport`], tiles replaced by file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSummary {
    pub stopped_reason: StopReason,
    pub attempts: Vec<Attempt>,
    pub accepted: Vec<AcceptedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedSummary {
    pub attempt: usize,
    pub source: CropSpec,
    pub tile_side: usize,
    pub files: Vec<String>,
}

impl SamplerReport {
    /// File stem for an accepted tile, encoding source size and position.
    pub fn tile_stem(tile: &AcceptedTile) -> String {
        format!(
            "tile_c{}_y{}_x{}",
            tile.source.size, tile.source.top, tile.source.left
        )
    }

    pub fn summary(&self) -> SamplerSummary {
        SamplerSummary {
            stopped_reason: self.stopped_reason,
            attempts: self.attempts.clone(),
            accepted: self
                .accepted
                .iter()
                .map(|a| {
                    let stem = Self::tile_stem(a);
                    AcceptedSummary {
                        attempt: a.attempt,
                        source: a.source,
                        tile_side: a.tile.height(),
                        files: vec![format!("{stem}_albedo.png"), format!("{stem}_normals.png")],
                    }
                })
                .collect(),
        }
    }
}

/// Turns an input crop into a candidate tile and judges it.
pub trait CandidatePipeline: Sync {
    fn synthesize(&self, crop: &TextureStack) -> Result<TextureStack>;

    fn judge(&self, candidate: &TextureStack) -> Result<TileabilityVerdict>;
}

/// Latent-tiling synthesis judged by the discriminator.
pub struct GanPipeline<'a> {
    pub generator: &'a Generator,
    pub discriminator: &'a Discriminator,
    pub split_level: usize,
    pub tileability: TileabilityConfig,
}

impl<'a> GanPipeline<'a> {
    pub fn new(generator: &'a Generator, discriminator: &'a Discriminator, tileability: TileabilityConfig) -> Self {
        Self {
            generator,
            discriminator,
            split_level: generator.config().split_level,
            tileability,
        }
    }
}

impl CandidatePipeline for GanPipeline<'_> {
    fn synthesize(&self, crop: &TextureStack) -> Result<TextureStack> {
        Ok(self.generator.generate_seamless(crop, self.split_level)?.1)
    }

    fn judge(&self, candidate: &TextureStack) -> Result<TileabilityVerdict> {
        evaluate_candidate(self.discriminator, candidate, &self.tileability)
    }
}

/// Up to `m` distinct crop windows of side `size`.
fn draw_specs(stack: &TextureStack, size: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CropSpec>> {
    let positions = (stack.height() - size + 1) * (stack.width() - size + 1);
    let wanted = m.min(positions);
    let mut seen = HashSet::with_capacity(wanted);
    let mut specs = Vec::with_capacity(wanted);
    while specs.len() < wanted {
        let spec = random_crop_spec(stack.height(), stack.width(), size, rng)?;
        if seen.insert(spec) {
            specs.push(spec);
        }
    }
    Ok(specs)
}

pub fn sample_textures(
    stack: &TextureStack,
    pipeline: &dyn CandidatePipeline,
    config: &SamplerConfig,
) -> Result<SamplerReport> {
    let (c_min, c_max) = config.resolve_range(stack)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut attempts = Vec::new();
    let mut accepted = Vec::new();
    let cap = config.max_candidates.unwrap_or(usize::MAX);

    let run = |spec: &CropSpec| -> Result<(TextureStack, TileabilityVerdict)> {
        let candidate = pipeline.synthesize(&stack.crop(*spec)?)?;
        let verdict = pipeline.judge(&candidate)?;
        Ok((candidate, verdict))
    };

    let mut c = c_max;
    let stopped_reason = 'search: loop {
        if c < c_min {
            break StopReason::Exhausted;
        }
        let side = c / 4 * 4;
        // All windows of a level are drawn up front so the random stream does
        // not depend on where evaluation stops.
        let specs = draw_specs(stack, side, config.m, &mut rng)?;
        let room = cap - attempts.len();
        let capped = specs.len() > room;
        let specs = &specs[..specs.len().min(room)];
        let results: Vec<Result<(TextureStack, TileabilityVerdict)>> = if config.parallel {
            specs.par_iter().map(run).collect()
        } else {
            // Sequential evaluation stops at the n-th acceptance.
            let mut out = Vec::with_capacity(specs.len());
            let mut found = accepted.len();
            for spec in specs {
                let r = run(spec)?;
                found += r.1.tileable as usize;
                out.push(Ok(r));
                if found == config.n {
                    break;
                }
            }
            out
        };
        for (spec, result) in specs.iter().zip(results) {
            let (candidate, verdict) = result?;
            let tileable = verdict.tileable;
            attempts.push(Attempt {
                level: c,
                crop: *spec,
                verdict,
            });
            if tileable {
                accepted.push(AcceptedTile {
                    tile: candidate,
                    source: *spec,
                    attempt: attempts.len() - 1,
                });
                if accepted.len() == config.n {
                    break 'search StopReason::FoundN;
                }
            }
        }
        if capped {
            break StopReason::Cap;
        }
        match c.checked_sub(config.size_step) {
            Some(next) => c = next,
            None => break StopReason::Exhausted,
        }
    };
    log::info!(
        "sampler stopped ({stopped_reason:?}) after {} candidates, {} accepted",
        attempts.len(),
        accepted.len()
    );
    Ok(SamplerReport {
        attempts,
        accepted,
        stopped_reason,
    })
}
