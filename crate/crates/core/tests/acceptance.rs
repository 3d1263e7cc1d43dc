//! End-to-end acceptance suite. Runs without the libtest harness so the
//! per-criterion PASS/FAIL lines always reach the console; exits non-zero if
//! any criterion failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use common::oracles;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilesynth_core::losses::{
    discriminator_loss, generator_adv_loss, gram_matrix, l1_loss, scalar, total_loss, ConvExtractor, FeatureExtractor,
    LossParts, LossWeights,
};
use tilesynth_core::metrics::{compare_to_exemplar, consistency_probe, seam_closure, ssim, MetricReport};
use tilesynth_core::net::receptive::propagate_unsafe;
use tilesynth_core::net::{DecoderMode, Generator, GeneratorConfig, ProbabilityMap};
use tilesynth_core::sampler::{sample_textures, CandidatePipeline, GanPipeline, SamplerConfig, StopReason};
use tilesynth_core::stack_io::random_crop;
use tilesynth_core::tileability::{is_tileable, TileabilityConfig, TileabilityVerdict};
use tilesynth_core::trainer::{select_best, train_with, Models, TrainConfig};
use tilesynth_core::{MapKind, Result, TextureStack};

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let stack = common::toy_stack(256);
    let mut shapes = Vec::new();
    for s in [64, 128, 256] {
        let g = Generator::build(
            GeneratorConfig {
                input_size: s,
                base_channels: 8,
                ..Default::default()
            },
            s as u64,
        )
        .unwrap();
        let input = random_crop(&stack, s, 1).unwrap().0;
        let out = g.forward(&input).unwrap();
        let (pre, tile) = g.generate_seamless(&input, 0).unwrap();
        let got = [out.height(), out.width(), pre.height(), pre.width(), tile.height(), tile.width()];
        if got != [2 * s, 2 * s, 4 * s, 4 * s, 2 * s, 2 * s] {
            return Err(format!("s={s}: got {got:?}"));
        }
        shapes.push(format!("{s}->{}/{}/{}", out.height(), pre.height(), tile.height()));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("{} in {secs:.1}s", shapes.join(", ")))
}

fn periodicity_error(g: &Generator, k: usize) -> f32 {
    let stack = common::toy_stack(2 * k);
    let input = random_crop(&stack, k, 4).unwrap().0;
    let (pre, _) = g.generate_seamless(&input, 0).unwrap();
    let side = 4 * k;
    let unsafe_1d = propagate_unsafe(&vec![false; k], &g.layers_after_split(0));
    let period = 2 * k;
    let mut worst = 0.0f32;
    for map in [pre.albedo(), pre.normals()] {
        for y in (0..side).filter(|&i| !unsafe_1d[i]) {
            for x in (0..side).filter(|&i| !unsafe_1d[i]) {
                for (py, px) in [(y + period, x), (y, x + period)] {
                    if py < side && px < side && !unsafe_1d[py] && !unsafe_1d[px] {
                        for ch in 0..3 {
                            worst = worst.max((map[[y, x, ch]] - map[[py, px, ch]]).abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut errs = Vec::new();
    for k in [64, 128] {
        let g = Generator::build(
            GeneratorConfig {
                input_size: k,
                base_channels: 16,
                ..Default::default()
            },
            21,
        )
        .unwrap();
        errs.push((k, periodicity_error(&g, k)));
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = errs.iter().all(|&(_, e)| e <= 1e-4) && secs < 60.0;
    ensure(ok, format!("max abs error per k {errs:?} in {secs:.1}s"))
}

fn map(scores: Array2<f32>) -> ProbabilityMap {
    ProbabilityMap::new(scores, 8).unwrap()
}

fn criterion_3() -> Outcome {
    let cfg = TileabilityConfig::default();
    let uniform = is_tileable(&map(Array2::from_elem((10, 10), 0.9)), &cfg).unwrap();
    let mut band = Array2::from_elem((10, 10), 0.9);
    band[[0, 4]] = 0.1;
    let band = is_tileable(&map(band), &cfg).unwrap();
    let mut rest = Array2::from_elem((10, 10), 0.9);
    rest[[0, 0]] = 0.1;
    let rest = is_tileable(&map(rest), &cfg).unwrap();
    let cases = uniform.tileable
        && uniform.m_v == uniform.m_d
        && !band.tileable
        && band.m_v < band.tau
        && rest.tileable
        && rest.tau == 0.1f32 as f64;
    if !cases {
        return Err("fixed cases disagree".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let gammas = [0.0, 0.25, 0.5, 0.8, 1.0, 1.2, 2.0];
    for i in 0..1000 {
        let (h, w) = (rng.random_range(5..24), rng.random_range(5..24));
        let m = map(Array2::from_shape_fn((h, w), |_| rng.random::<f32>()));
        let verdicts: Vec<bool> = gammas
            .iter()
            .map(|&gamma| is_tileable(&m, &TileabilityConfig { gamma, ..cfg }).unwrap().tileable)
            .collect();
        if verdicts.windows(2).any(|v| v[1] && !v[0]) {
            return Err(format!("map {i} violates gamma monotonicity: {verdicts:?}"));
        }
    }
    Ok("3 fixed cases, 1000 random maps monotone in gamma".into())
}

struct AlwaysFalse;

impl CandidatePipeline for AlwaysFalse {
    fn synthesize(&self, crop: &TextureStack) -> Result<TextureStack> {
        Ok(crop.clone())
    }

    fn judge(&self, _: &TextureStack) -> Result<TileabilityVerdict> {
        let mut scores = Array2::from_elem((10, 10), 0.9f32);
        scores[[0, 5]] = 0.1;
        is_tileable(&map(scores), &TileabilityConfig::default())
    }
}

fn criterion_4() -> Outcome {
    let stack = common::toy_stack(108);
    let cfg = SamplerConfig {
        c_min: 100,
        c_max: Some(108),
        seed: 9,
        ..SamplerConfig::default()
    };
    let a = sample_textures(&stack, &AlwaysFalse, &cfg).unwrap();
    let b = sample_textures(&stack, &AlwaysFalse, &cfg).unwrap();
    let same = a.attempts.iter().map(|x| x.crop).eq(b.attempts.iter().map(|x| x.crop));
    ensure(
        a.attempts.len() == 25 && a.stopped_reason == StopReason::Exhausted && same,
        format!("{} attempts, {:?}, deterministic={same}", a.attempts.len(), a.stopped_reason),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (a, ta) = oracles::random_tensor(&mut rng, &[1, 6, 9, 7]);
        let (b, tb) = oracles::random_tensor(&mut rng, &[1, 6, 9, 7]);
        worst = worst.max((scalar(&l1_loss(&ta, &tb).unwrap()).unwrap() - oracles::l1(&a, &b)).abs());
        let (f, tf) = oracles::random_tensor(&mut rng, &[1, 5, 4, 6]);
        let got: Vec<Vec<f64>> = gram_matrix(&tf).unwrap().to_vec2().unwrap();
        let want = oracles::gram(&f, 5, 4, 6);
        for (gr, wr) in got.iter().zip(&want) {
            for (g, w) in gr.iter().zip(wr) {
                worst = worst.max((g - w).abs());
            }
        }
        let (r, tr) = oracles::random_tensor(&mut rng, &[5, 6]);
        let (p, tp) = oracles::random_tensor(&mut rng, &[5, 6]);
        worst = worst.max((scalar(&discriminator_loss(&tr, &tp).unwrap()).unwrap() - oracles::d_loss(&r, &p)).abs());
        worst = worst.max((scalar(&generator_adv_loss(&tp).unwrap()).unwrap() - oracles::g_adv_loss(&p)).abs());
    }
    let parts = LossParts {
        adv: 0.7,
        l1_albedo: 0.125,
        l1_normals: 0.25,
        style: 0.5,
    };
    let b = total_loss(parts, &LossWeights::default());
    let composed = b.total == 0.7 + 10.0 * 0.125 + 10.0 * 0.25 + 0.5 && b.non_adversarial == b.total - 0.7;
    let extractor = ConvExtractor::random_with_widths(9, &[4, 4]);
    let grad = oracles::generator_gradient_check(&extractor, 24, 1e-7);
    ensure(
        worst < 1e-6 && composed && grad.checked >= 20 && grad.worst_relative < 1e-3,
        format!(
            "oracle deviation {worst:.2e}, composition exact={composed}, gradient rel error {:.2e} over {} coords",
            grad.worst_relative, grad.checked
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut identity = true;
    for _ in 0..100 {
        let a = Array3::from_shape_fn((64, 64, 3), |_| rng.random::<f32>());
        let b = Array3::from_shape_fn((64, 64, 3), |_| rng.random::<f32>());
        worst = worst.max((ssim(a.view(), b.view()).unwrap() - oracles::ssim(&a, &b)).abs());
        identity &= (ssim(a.view(), a.view()).unwrap() - 1.0).abs() < 1e-9;
    }
    ensure(worst < 1e-6 && identity, format!("max deviation {worst:.2e}, ssim(x,x)=1: {identity}"))
}

fn extractor(seed: u64) -> Arc<dyn FeatureExtractor> {
    Arc::new(ConvExtractor::random(seed))
}

struct Trained {
    models: Models,
    detail: String,
}

fn criterion_6(stack: &TextureStack) -> (Outcome, Option<Trained>) {
    let start = Instant::now();
    let cfg = common::toy_config(2000, 7);
    let mut evals = Vec::new();
    let outcome = train_with(stack, cfg, extractor(7), |r, _| {
        evals.push((r.iteration, r.non_adversarial_score));
        Ok(())
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mean = |s: &[tilesynth_core::losses::LossBreakdown]| s.iter().map(|b| b.non_adversarial).sum::<f64>() / s.len() as f64;
    let first = mean(&outcome.history[..100]);
    let last = mean(&outcome.history[outcome.history.len() - 100..]);
    let scores: Vec<f64> = evals.iter().map(|e| e.1).collect();
    let argmin = select_best(&scores).map(|i| evals[i].0);
    let selected = argmin == Some(outcome.best.iteration);
    let ratio = last / first;
    let detail = format!(
        "first-100 {first:.3}, last-100 {last:.3}, ratio {ratio:.3}, best iteration {} (argmin {selected}), {secs:.0}s",
        outcome.best.iteration
    );
    let ok = ratio <= 0.5 && selected && secs <= 900.0;
    let trained = Trained {
        models: outcome.best.models,
        detail: detail.clone(),
    };
    (ensure(ok, detail), Some(trained))
}

fn criterion_7(stack: &TextureStack, models: &Models) -> Outcome {
    let pipeline = GanPipeline::new(&models.generator, &models.discriminator, TileabilityConfig::default());
    let cfg = SamplerConfig {
        n: 1,
        c_min: 64,
        size_step: 8,
        ..SamplerConfig::default()
    };
    let report = sample_textures(stack, &pipeline, &cfg).unwrap();
    let Some(tile) = report.accepted.first() else {
        return Err(format!(
            "no tile accepted after {} attempts ({:?})",
            report.attempts.len(),
            report.stopped_reason
        ));
    };
    let stats = seam_closure(&tile.tile, MapKind::Albedo).unwrap();
    ensure(
        stats.is_closed(1.5),
        format!(
            "accepted crop side {} after {} attempts; seam/interior gradient ratio {:.3}",
            tile.source.size,
            report.attempts.len(),
            stats.ratio()
        ),
    )
}

fn criterion_8(stack: &TextureStack, models: &Models) -> Outcome {
    let rows = consistency_probe(&models.discriminator, stack, &[5, 100]).unwrap();
    let (s0, s5, s100) = (rows[0].mean_score, rows[1].mean_score, rows[2].mean_score);
    ensure(s0 > s5, format!("score(0) {s0:.4}, score(5) {s5:.4}, score(100) {s100:.4}"))
}

fn criterion_10(stack: &TextureStack) -> Outcome {
    let mut reports: Vec<(DecoderMode, MetricReport)> = Vec::new();
    for mode in [DecoderMode::Split, DecoderMode::Joint] {
        let mut cfg: TrainConfig = common::toy_config(300, 13);
        cfg.eval_interval = 100;
        cfg.generator.decoder_mode = mode;
        let outcome = train_with(stack, cfg, extractor(13), |_, _| Ok(())).unwrap();
        let input = random_crop(stack, 128, 0).unwrap().0;
        let (_, tile) = outcome.best.models.generator.generate_seamless(&input, 0).unwrap();
        reports.push((mode, compare_to_exemplar(&tile, stack, None).unwrap()));
    }
    let ok = reports.iter().all(|(_, r)| r.ssim.is_finite());
    let detail = reports
        .iter()
        .map(|(m, r)| format!("{m:?} albedo SSIM {:.4}", r.ssim_per_map.albedo))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(ok, format!("{detail} (reference magnitudes: split 0.3123, joint 0.2774)"))
}

fn run(results: &mut Vec<bool>, index: usize, f: impl FnOnce() -> Outcome) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match &outcome {
        Ok(d) => println!("criterion {index}: PASS {d}"),
        Err(d) => println!("criterion {index}: FAIL {d}"),
    }
    results.push(outcome.is_ok());
}

fn main() {
    let mut results = Vec::new();
    run(&mut results, 1, criterion_1);
    run(&mut results, 2, criterion_2);
    run(&mut results, 3, criterion_3);
    run(&mut results, 4, criterion_4);
    run(&mut results, 5, criterion_5);

    let stack = common::toy_stack(256);
    let mut trained = None;
    run(&mut results, 6, || {
        let (outcome, t) = criterion_6(&stack);
        trained = t;
        outcome
    });
    match &trained {
        Some(t) => {
            println!("  trained model: {}", t.detail);
            run(&mut results, 7, || criterion_7(&stack, &t.models));
            run(&mut results, 8, || criterion_8(&stack, &t.models));
        }
        None => {
            run(&mut results, 7, || Err("no trained model".into()));
            run(&mut results, 8, || Err("no trained model".into()));
        }
    }
    run(&mut results, 9, criterion_9);
    run(&mut results, 10, || criterion_10(&stack));

    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
