//! Self-supervised adversarial-expansion training.
//!
//! Each step draws a `2k x 2k` target crop from the exemplar and a `k x k`
//! source crop inside it, updates the discriminator on (target, G(source)),
//! then updates the generator on the weighted objective against the target.
//! The checkpoint kept for synthesis is the one with the lowest moving
//! average of the non-adversarial loss, not the last one.

use std::collections::{BTreeSet, VecDeque};
use std::str::FromStr;
use std::sync::Arc;

use candle_core::Tensor;
use candle_nn::optim::{AdamW, Optimizer, ParamsAdamW};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    discriminator_loss, generator_adv_loss, l1_loss, scalar, style_loss, total_loss, FeatureExtractor,
    LossBreakdown, LossParts, LossWeights,
};
use crate::net::{stack_to_tensor, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Track};
use crate::stack_io::{random_crop_with, TextureStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Adv,
    L1Albedo,
    L1Normals,
    Style,
}

impl LossTerm {
    pub const ALL: [LossTerm; 4] = [LossTerm::Adv, LossTerm::L1Albedo, LossTerm::L1Normals, LossTerm::Style];
}

impl FromStr for LossTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adv" | "adversarial" => Ok(LossTerm::Adv),
            "l1_albedo" | "l1a" => Ok(LossTerm::L1Albedo),
            "l1_normals" | "l1n" => Ok(LossTerm::L1Normals),
            "style" => Ok(LossTerm::Style),
            other => Err(Error::InvalidTrainConfig(format!("unknown loss term {other:?}"))),
        }
    }
}

/// Set of enabled loss terms; everything is on by default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationMask(BTreeSet<LossTerm>);

impl Default for AblationMask {
    fn default() -> Self {
        Self(LossTerm::ALL.into_iter().collect())
    }
}

impl AblationMask {
    pub fn only(terms: &[LossTerm]) -> Self {
        Self(terms.iter().copied().collect())
    }

    pub fn without(terms: &[LossTerm]) -> Self {
        Self(LossTerm::ALL.into_iter().filter(|t| !terms.contains(t)).collect())
    }

    pub fn enabled(&self, term: LossTerm) -> bool {
        self.0.contains(&term)
    }

    /// The weights with every disabled term zeroed.
    pub fn apply(&self, w: &LossWeights) -> LossWeights {
        let on = |t: LossTerm, v: f64| if self.enabled(t) { v } else { 0.0 };
        LossWeights {
            adv: on(LossTerm::Adv, w.adv),
            l1_albedo: on(LossTerm::L1Albedo, w.l1_albedo),
            l1_normals: on(LossTerm::L1Normals, w.l1_normals),
            style: on(LossTerm::Style, w.style),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Source crop side; targets are `2k`.
    pub k: usize,
    pub iterations: usize,
    pub lr: f64,
    /// `(iteration, divisor)`: after `iteration` steps the rate is divided.
    pub lr_drops: Vec<(usize, f64)>,
    pub batch_size: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
    pub ablation: AblationMask,
    pub beta1: f64,
    pub beta2: f64,
    /// Steps between checkpoint evaluations.
    pub eval_interval: usize,
    /// Trailing window of the non-adversarial moving average.
    pub average_window: usize,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 128,
            iterations: 50_000,
            lr: 2e-4,
            lr_drops: vec![(30_000, 5.0), (40_000, 5.0)],
            batch_size: 1,
            seed: 0,
            loss_weights: LossWeights::default(),
            ablation: AblationMask::default(),
            beta1: 0.5,
            beta2: 0.999,
            eval_interval: 500,
            average_window: 100,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrainConfig(m));
        if self.k < 16 || self.k % 4 != 0 {
            return bad(format!("k = {} must be >= 16 and divisible by 4", self.k));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr = {} must be positive", self.lr));
        }
        if self.lr_drops.iter().any(|&(_, d)| !(d > 0.0)) {
            return bad("lr divisors must be positive".into());
        }
        if self.batch_size == 0 || self.eval_interval == 0 || self.average_window == 0 {
            return bad("batch_size, eval_interval and average_window must be positive".into());
        }
        self.loss_weights.validate()?;
        self.generator_config().validate()
    }

    /// Generator config with `input_size` tied to `k`.
    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            input_size: self.k,
            ..self.generator.clone()
        }
    }

    /// Learning rate used by step `t` (1-based).
    pub fn lr_at(&self, t: usize) -> f64 {
        self.lr_drops
            .iter()
            .filter(|&&(after, _)| t > after)
            .fold(self.lr, |lr, &(_, div)| lr / div)
    }
}

/// A generator/discriminator pair.
#[derive(Debug, Clone)]
pub struct Models {
    pub generator: Generator,
    pub discriminator: Discriminator,
}

impl Models {
    pub fn build(config: &TrainConfig) -> Result<Self> {
        Ok(Self {
            generator: Generator::build(config.generator_config(), config.seed)?,
            discriminator: Discriminator::build(config.discriminator.clone(), config.seed.wrapping_add(1))?,
        })
    }

    pub fn snapshot(&self) -> Result<Self> {
        Ok(Self {
            generator: self.generator.snapshot()?,
            discriminator: self.discriminator.snapshot()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub iteration: usize,
    pub models: Models,
    /// Moving average of the non-adversarial loss; infinite for the
    /// untrained initialization.
    pub non_adversarial_score: f64,
}

/// Emitted every `eval_interval` steps and at the final step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub lr: f64,
    /// Mean of each loss term over the trailing window.
    pub window_mean: LossBreakdown,
    pub non_adversarial_score: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub history: Vec<LossBreakdown>,
    pub evaluations: Vec<EvalRecord>,
}

/// Index of the first minimal score, ignoring NaNs.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
            Some((_, b)) if b <= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// Optimizer state plus models for step-by-step training.
pub struct Trainer {
    config: TrainConfig,
    models: Models,
    extractor: Arc<dyn FeatureExtractor>,
    g_opt: AdamW,
    d_opt: AdamW,
    rng: ChaCha8Rng,
    step: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, extractor: Arc<dyn FeatureExtractor>) -> Result<Self> {
        config.validate()?;
        let models = Models::build(&config)?;
        Self::with_models(config, models, extractor)
    }

    pub fn with_models(config: TrainConfig, models: Models, extractor: Arc<dyn FeatureExtractor>) -> Result<Self> {
        config.validate()?;
        let params = ParamsAdamW {
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        let g_opt = AdamW::new(models.generator.vars(), params.clone())?;
        let d_opt = AdamW::new(models.discriminator.vars(), params)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
        Ok(Self {
            config,
            models,
            extractor,
            g_opt,
            d_opt,
            rng,
            step: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    /// Number of completed steps.
    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        self.g_opt.learning_rate()
    }

    /// Draws a (target, source) training pair: `2k` target anywhere in the
    /// stack, `k` source anywhere in the target.
    pub fn draw_pair(&mut self, stack: &TextureStack) -> Result<(TextureStack, TextureStack)> {
        let k = self.config.k;
        check_stack(stack, k)?;
        let (target, _) = random_crop_with(stack, 2 * k, &mut self.rng)?;
        let (source, _) = random_crop_with(&target, k, &mut self.rng)?;
        Ok((target, source))
    }

    /// One discriminator update followed by one generator update.
    pub fn step(&mut self, stack: &TextureStack) -> Result<LossBreakdown> {
        check_stack(stack, self.config.k)?;
        let lr = self.config.lr_at(self.step + 1);
        self.g_opt.set_learning_rate(lr);
        self.d_opt.set_learning_rate(lr);

        let gen = &self.models.generator;
        let (dtype, device) = (gen.dtype(), gen.device().clone());
        let mut targets = Vec::with_capacity(self.config.batch_size);
        let mut sources = Vec::with_capacity(self.config.batch_size);
        for _ in 0..self.config.batch_size {
            let (t, s) = self.draw_pair(stack)?;
            targets.push(stack_to_tensor(&t, dtype, &device)?);
            sources.push(stack_to_tensor(&s, dtype, &device)?);
        }
        let target = Tensor::cat(&targets, 0)?;
        let source = Tensor::cat(&sources, 0)?;

        let mask = &self.config.ablation;
        let gen = &self.models.generator;
        let disc = &self.models.discriminator;
        let fake = gen.forward_tensor(&source, Track::Grad)?;

        if mask.enabled(LossTerm::Adv) {
            let real_scores = disc.forward_tensor(&target, Track::Grad)?;
            let fake_scores = disc.forward_tensor(&fake.detach(), Track::Grad)?;
            let d_loss = discriminator_loss(&real_scores, &fake_scores)?;
            self.d_opt.step(&d_loss.backward()?)?;
        }

        let (objective, parts, weights) =
            generator_objective(&fake, &target, disc, self.extractor.as_ref(), &self.config.loss_weights, mask)?;
        if let Some(total) = objective {
            self.g_opt.step(&total.backward()?)?;
        }
        self.step += 1;
        Ok(total_loss(parts, &weights))
    }

    pub fn into_models(self) -> Models {
        self.models
    }
}

/// Weighted generator objective for a batch of fakes against their targets.
///
/// Returns the differentiable total (`None` when every term is disabled),
/// the raw per-term values and the effective weights. The discriminator's
/// weights are detached, so gradients reach the generator only.
pub fn generator_objective(
    fake: &Tensor,
    target: &Tensor,
    discriminator: &Discriminator,
    extractor: &dyn FeatureExtractor,
    loss_weights: &LossWeights,
    mask: &AblationMask,
) -> Result<(Option<Tensor>, LossParts, LossWeights)> {
    let weights = mask.apply(loss_weights);
    let mut parts = LossParts::default();
    let mut objective: Vec<Tensor> = Vec::new();
    if mask.enabled(LossTerm::Adv) {
        let scores = discriminator.forward_tensor(fake, Track::NoGrad)?;
        let adv = generator_adv_loss(&scores)?;
        parts.adv = scalar(&adv)?;
        objective.push((adv * weights.adv)?);
    }
    if mask.enabled(LossTerm::L1Albedo) {
        let l = l1_loss(&fake.narrow(1, 0, 3)?, &target.narrow(1, 0, 3)?)?;
        parts.l1_albedo = scalar(&l)?;
        objective.push((l * weights.l1_albedo)?);
    }
    if mask.enabled(LossTerm::L1Normals) {
        let l = l1_loss(&fake.narrow(1, 3, 3)?, &target.narrow(1, 3, 3)?)?;
        parts.l1_normals = scalar(&l)?;
        objective.push((l * weights.l1_normals)?);
    }
    if mask.enabled(LossTerm::Style) {
        let n = fake.dim(0)?;
        let mut per_sample = Vec::with_capacity(n);
        for b in 0..n {
            per_sample.push(style_loss(&fake.narrow(0, b, 1)?, &target.narrow(0, b, 1)?, extractor)?);
        }
        let l = (Tensor::stack(&per_sample, 0)?.sum_all()? / n as f64)?;
        parts.style = scalar(&l)?;
        objective.push((l * weights.style)?);
    }
    let total = if objective.is_empty() {
        None
    } else {
        Some(Tensor::stack(&objective, 0)?.sum_all()?)
    };
    Ok((total, parts, weights))
}

fn check_stack(stack: &TextureStack, k: usize) -> Result<()> {
    if stack.min_side() < 2 * k {
        return Err(Error::StackTooSmall {
            side: stack.min_side(),
            required: 2 * k,
        });
    }
    Ok(())
}

/// Runs `config.iterations` steps and returns the best checkpoint.
pub fn train(stack: &TextureStack, config: TrainConfig, extractor: Arc<dyn FeatureExtractor>) -> Result<TrainOutcome> {
    train_with(stack, config, extractor, |_, _| Ok(()))
}

/// As [`train`], calling `on_eval` with each evaluation record and the
/// current models (e.g. to write checkpoint files).
pub fn train_with(
    stack: &TextureStack,
    config: TrainConfig,
    extractor: Arc<dyn FeatureExtractor>,
    mut on_eval: impl FnMut(&EvalRecord, &Models) -> Result<()>,
) -> Result<TrainOutcome> {
    check_stack(stack, config.k)?;
    let mut trainer = Trainer::new(config, extractor)?;
    let cfg = trainer.config().clone();
    let mut best = Checkpoint {
        iteration: 0,
        models: trainer.models().snapshot()?,
        non_adversarial_score: f64::INFINITY,
    };
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut window: VecDeque<LossBreakdown> = VecDeque::with_capacity(cfg.average_window);
    let mut evaluations = Vec::new();

    for t in 1..=cfg.iterations {
        let lr = cfg.lr_at(t);
        let breakdown = trainer.step(stack)?;
        history.push(breakdown);
        if window.len() == cfg.average_window {
            window.pop_front();
        }
        window.push_back(breakdown);

        if t % cfg.eval_interval == 0 || t == cfg.iterations {
            let window_mean = mean_breakdown(window.iter());
            let record = EvalRecord {
                iteration: t,
                lr,
                window_mean,
                non_adversarial_score: window_mean.non_adversarial,
            };
            log::info!(
                "iter {t}: non-adversarial {:.5} (adv {:.4}, l1a {:.4}, l1n {:.4}, style {:.5}) lr {lr:.2e}",
                record.non_adversarial_score,
                window_mean.adv,
                window_mean.l1_albedo,
                window_mean.l1_normals,
                window_mean.style
            );
            on_eval(&record, trainer.models())?;
            if record.non_adversarial_score < best.non_adversarial_score {
                best = Checkpoint {
                    iteration: t,
                    models: trainer.models().snapshot()?,
                    non_adversarial_score: record.non_adversarial_score,
                };
            }
            evaluations.push(record);
        }
    }
    Ok(TrainOutcome {
        best,
        history,
        evaluations,
    })
}

fn mean_breakdown<'a>(items: impl ExactSizeIterator<Item = &'a LossBreakdown>) -> LossBreakdown {
    let n = items.len().max(1) as f64;
    let sum = items.fold(LossBreakdown::default(), |acc, b| LossBreakdown {
        adv: acc.adv + b.adv,
        l1_albedo: acc.l1_albedo + b.l1_albedo,
        l1_normals: acc.l1_normals + b.l1_normals,
        style: acc.style + b.style,
        total: acc.total + b.total,
        non_adversarial: acc.non_adversarial + b.non_adversarial,
    });
    LossBreakdown {
        adv: sum.adv / n,
        l1_albedo: sum.l1_albedo / n,
        l1_normals: sum.l1_normals / n,
        style: sum.style / n,
        total: sum.total / n,
        non_adversarial: sum.non_adversarial / n,
    }
}
