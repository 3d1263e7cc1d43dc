mod common;

use candle_core::{DType, Device};
use tilesynth_core::net::checkpoint::{load_checkpoint, save_checkpoint};
use tilesynth_core::net::receptive::{propagate_unsafe, Layer1d};
use tilesynth_core::net::{
    stack_to_tensor, DecoderMode, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, PaddingMode, Track,
};
use tilesynth_core::stack_io::random_crop;
use tilesynth_core::Error;

fn small(input_size: usize, base: usize) -> GeneratorConfig {
    GeneratorConfig {
        input_size,
        base_channels: base,
        ..GeneratorConfig::default()
    }
}

fn max_abs_diff(a: &ndarray::Array3<f32>, b: ndarray::ArrayView3<f32>) -> f32 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

#[test]
fn expansion_shapes() {
    let stack = common::toy_stack(256);
    for mode in [DecoderMode::Split, DecoderMode::Joint] {
        for s in [64, 128] {
            let g = Generator::build(
                GeneratorConfig {
                    decoder_mode: mode,
                    ..small(s, 8)
                },
                1,
            )
            .unwrap();
            let input = random_crop(&stack, s, 0).unwrap().0;
            let out = g.forward(&input).unwrap();
            assert_eq!((out.height(), out.width()), (2 * s, 2 * s));
            let (pre, tile) = g.generate_seamless(&input, 0).unwrap();
            assert_eq!((pre.height(), pre.width()), (4 * s, 4 * s));
            assert_eq!((tile.height(), tile.width()), (2 * s, 2 * s));
        }
    }
}

#[test]
fn rectangular_inputs_expand_per_axis() {
    let g = Generator::build(small(64, 4), 3).unwrap();
    let input = common::toy_stack(128).crop_rect(0, 0, 48, 80).unwrap();
    let out = g.forward(&input).unwrap();
    assert_eq!((out.height(), out.width()), (96, 160));
}

#[test]
fn indivisible_and_bad_split_are_rejected() {
    let g = Generator::build(small(64, 4), 3).unwrap();
    let odd = common::toy_stack(128).crop_rect(0, 0, 66, 64).unwrap();
    assert!(matches!(g.forward(&odd), Err(Error::SizeNotDivisible(_))));
    let ok = common::toy_stack(64);
    assert!(matches!(
        g.generate_seamless(&ok, 6),
        Err(Error::InvalidSplitLevel { level: 6, max: 5 })
    ));
}

#[test]
fn output_values_are_in_unit_range() {
    let g = Generator::build(small(64, 8), 9).unwrap();
    let out = g.forward(&common::toy_stack(64)).unwrap();
    for v in out.albedo().iter().chain(out.normals().iter()) {
        assert!((0.0..=1.0).contains(v));
    }
}

#[test]
fn init_weight_moments() {
    let g = Generator::build(GeneratorConfig::default(), 11).unwrap();
    let d = Discriminator::build(DiscriminatorConfig::default(), 12).unwrap();
    let mut weights: Vec<f64> = Vec::new();
    let vars = g.named_vars().into_iter().chain(d.named_vars());
    for (name, var) in vars {
        let values: Vec<f32> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        if name.ends_with(".bias") {
            assert!(values.iter().all(|&v| v == 0.0), "{name} not zero-initialized");
        } else {
            weights.extend(values.iter().map(|&v| v as f64));
        }
    }
    assert!(weights.len() >= 1_000_000, "only {} weights", weights.len());
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let std = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 1e-3, "mean {mean}");
    assert!((std - 0.02).abs() < 1e-3, "std {std}");
}

#[test]
fn same_seed_same_network() {
    let a = Generator::build(small(64, 4), 5).unwrap();
    let b = Generator::build(small(64, 4), 5).unwrap();
    let c = Generator::build(small(64, 4), 6).unwrap();
    let input = common::toy_stack(64);
    let (oa, ob, oc) = (a.forward(&input).unwrap(), b.forward(&input).unwrap(), c.forward(&input).unwrap());
    assert_eq!(oa.albedo(), ob.albedo());
    assert_ne!(oa.albedo(), oc.albedo());
}

/// Checks 2k-periodicity of the pre-crop on every receptive-field-safe pixel.
fn assert_latent_periodicity(g: &Generator, k: usize, split_level: usize) -> f32 {
    let stack = common::toy_stack(2 * k);
    let input = random_crop(&stack, k, 4).unwrap().0;
    let (pre, _) = g.generate_seamless(&input, split_level).unwrap();
    let side = 4 * k;
    let latent = k; // tiled latent side: 2 x (k / 2)
    let unsafe_1d = propagate_unsafe(&vec![false; latent], &g.layers_after_split(split_level));
    assert_eq!(unsafe_1d.len(), side);
    let safe: Vec<usize> = (0..side).filter(|&i| !unsafe_1d[i]).collect();
    assert!(!safe.is_empty(), "no safe band");
    let period = 2 * k;
    let mut worst = 0.0f32;
    let mut compared = 0usize;
    for map in [pre.albedo(), pre.normals()] {
        for &y in &safe {
            for &x in &safe {
                for (py, px) in [(y + period, x), (y, x + period)] {
                    if py < side && px < side && !unsafe_1d[py] && !unsafe_1d[px] {
                        for ch in 0..3 {
                            worst = worst.max((map[[y, x, ch]] - map[[py, px, ch]]).abs());
                        }
                        compared += 1;
                    }
                }
            }
        }
    }
    assert!(compared > 0);
    worst
}

#[test]
fn latent_tiling_is_periodic_in_safe_band() {
    for (k, base) in [(64, 64), (128, 16)] {
        let g = Generator::build(small(k, base), 21).unwrap();
        for split in [0, 2, 5] {
            let err = assert_latent_periodicity(&g, k, split);
            assert!(err <= 1e-4, "k={k} split={split}: max error {err}");
        }
    }
}

#[test]
fn safe_band_is_large_with_zero_padding() {
    // The unsafe margin is a fixed number of pixels, so it shrinks relative
    // to the output as k grows.
    let g = Generator::build(small(128, 4), 0).unwrap();
    let mask = propagate_unsafe(&vec![false; 128], &g.layers_after_split(0));
    let unsafe_count = mask.iter().filter(|&&u| u).count();
    assert!(unsafe_count < 512 / 4, "{unsafe_count} unsafe of 512");
}

#[test]
fn discriminator_geometry() {
    let d = Discriminator::build(
        DiscriminatorConfig {
            base_channels: 4,
            ..Default::default()
        },
        2,
    )
    .unwrap();
    assert_eq!(d.downsample_factor(), 8);
    assert_eq!(d.receptive_field(), 70);
    let big = common::toy_stack(256);
    for n in [70, 71, 96, 128, 150, 256] {
        let crop = big.crop_rect(0, 0, n, 256).unwrap();
        let map = d.discriminate(&crop).unwrap();
        assert_eq!((map.height(), map.width()), (n.div_ceil(8), 32), "n = {n}");
        assert!(map.scores().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let tiny = big.crop_rect(0, 0, 69, 100).unwrap();
    assert!(matches!(d.discriminate(&tiny), Err(Error::InputTooSmall { required: 70, .. })));
}

#[test]
fn discriminator_map_inherits_input_period() {
    // Instance normalization uses whole-image statistics, so equivariance is
    // checked within one image: a 32-pixel-periodic input gives a map that
    // repeats every 4 cells wherever no padding is in view.
    let d = Discriminator::build(
        DiscriminatorConfig {
            base_channels: 4,
            ..Default::default()
        },
        8,
    )
    .unwrap();
    let n = 256;
    let map = d.discriminate(&common::toy_stack(n)).unwrap();
    let layers: Vec<Layer1d> = [2, 2, 2, 1, 1]
        .iter()
        .map(|&stride| Layer1d::Conv {
            kernel: 4,
            stride,
            pad_before: 1,
            pad_after: 2,
        })
        .collect();
    let unsafe_1d = propagate_unsafe(&vec![false; n], &layers);
    assert_eq!(unsafe_1d.len(), map.height());
    let cells = common::TOY_PERIOD / 8;
    let mut compared = 0;
    for i in 0..map.height() - cells {
        for j in 0..map.width() {
            if [i, i + cells, j].iter().all(|&c| !unsafe_1d[c]) {
                let (a, b) = (map.scores()[[i, j]], map.scores()[[i + cells, j]]);
                assert!((a - b).abs() < 1e-5, "cells ({i},{j}) and ({},{j}): {a} vs {b}", i + cells);
                compared += 1;
            }
        }
    }
    assert!(compared > 0);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.safetensors");
    let g = Generator::build(
        GeneratorConfig {
            decoder_mode: DecoderMode::Joint,
            padding_mode: PaddingMode::Reflect,
            split_level: 2,
            ..small(64, 4)
        },
        31,
    )
    .unwrap();
    let d = Discriminator::build(
        DiscriminatorConfig {
            base_channels: 4,
            ..Default::default()
        },
        32,
    )
    .unwrap();
    save_checkpoint(&path, &g, &d, 1500, 0.25).unwrap();
    let (g2, d2, manifest) = load_checkpoint(&path).unwrap();
    assert_eq!(manifest.iteration, 1500);
    assert_eq!(manifest.non_adversarial_score, Some(0.25));
    assert_eq!(g2.config(), g.config());
    let input = common::toy_stack(128);
    let crop = input.crop_rect(0, 0, 64, 64).unwrap();
    assert_eq!(g.forward(&crop).unwrap().albedo(), g2.forward(&crop).unwrap().albedo());
    assert_eq!(
        d.discriminate(&input).unwrap().scores(),
        d2.discriminate(&input).unwrap().scores()
    );

    std::fs::write(dir.path().join("junk.safetensors"), b"not a checkpoint").unwrap();
    assert!(matches!(
        load_checkpoint(dir.path().join("junk.safetensors")),
        Err(Error::InvalidCheckpoint { .. })
    ));
    assert!(matches!(load_checkpoint(dir.path().join("none")), Err(Error::FileMissing(_))));
}

#[test]
fn snapshot_is_a_deep_copy() {
    let g = Generator::build(small(64, 4), 40).unwrap();
    let snap = g.snapshot().unwrap();
    let (_, var) = &g.named_vars()[0];
    var.set(&var.as_tensor().zeros_like().unwrap()).unwrap();
    let (_, copy) = &snap.named_vars()[0];
    let sum: f32 = copy.as_tensor().abs().unwrap().sum_all().unwrap().to_scalar().unwrap();
    assert!(sum > 0.0);
}

#[test]
fn stack_tensor_packing_round_trips() {
    let s = common::toy_stack(32);
    let t = stack_to_tensor(&s, DType::F32, &Device::Cpu).unwrap();
    assert_eq!(t.dims(), &[1, 6, 32, 32]);
    let back = tilesynth_core::net::tensor_to_stack(&t).unwrap();
    assert!(max_abs_diff(s.albedo(), back.albedo().view()) == 0.0);
    assert!(max_abs_diff(s.normals(), back.normals().view()) == 0.0);
}

#[test]
fn no_grad_forward_matches_grad_forward() {
    let g = Generator::build(small(64, 4), 41).unwrap();
    let x = stack_to_tensor(&common::toy_stack(64), DType::F32, &Device::Cpu).unwrap();
    let a = g.forward_tensor(&x, Track::Grad).unwrap();
    let b = g.forward_tensor(&x, Track::NoGrad).unwrap();
    let diff: f32 = (a - b).unwrap().abs().unwrap().max_all().unwrap().to_scalar().unwrap();
    assert_eq!(diff, 0.0);
}
