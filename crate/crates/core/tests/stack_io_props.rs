use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tilesynth_core::stack_io::{center_crop, random_crop, random_crop_spec, tile_stack};
use tilesynth_core::TextureStack;

/// Stack whose pixel values encode their own coordinates.
fn coded(h: usize, w: usize) -> TextureStack {
    TextureStack::from_fn(h, w, |y, x| {
        let a = [y as f32 / 64.0, x as f32 / 64.0, 0.25];
        let n = [x as f32 / 64.0, 0.5, y as f32 / 64.0];
        (a, n)
    })
    .unwrap()
}

fn decode(stack: &TextureStack, y: usize, x: usize) -> ((usize, usize), (usize, usize)) {
    let a = stack.albedo();
    let n = stack.normals();
    let c = |v: f32| (v * 64.0).round() as usize;
    ((c(a[[y, x, 0]]), c(a[[y, x, 1]])), (c(n[[y, x, 2]]), c(n[[y, x, 0]])))
}

#[test]
fn crop_positions_are_uniform() {
    let (h, w, size) = (12, 13, 8);
    let (rows, cols) = (h - size + 1, w - size + 1);
    let cells = rows * cols;
    let draws = 600 * cells;
    let mut counts = vec![0usize; cells];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..draws {
        let spec = random_crop_spec(h, w, size, &mut rng).unwrap();
        counts[spec.top * cols + spec.left] += 1;
    }
    let expected = draws as f64 / cells as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 = {chi2}, p = {p}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crop_windows_align_across_maps(h in 1usize..40, w in 1usize..40, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let size = 1 + ((h.min(w) - 1) as f64 * frac) as usize;
        let stack = coded(h, w);
        let (crop, spec) = random_crop(&stack, size, seed).unwrap();
        prop_assert_eq!(crop.height(), size);
        prop_assert_eq!(crop.width(), size);
        prop_assert!(spec.top + size <= h && spec.left + size <= w);
        for y in 0..size {
            for x in 0..size {
                let (ay, nx) = decode(&crop, y, x);
                prop_assert_eq!(ay, (spec.top + y, spec.left + x));
                prop_assert_eq!(nx, (spec.top + y, spec.left + x));
            }
        }
    }

    #[test]
    fn tiling_is_modular_indexing(h in 1usize..12, w in 1usize..12, ny in 1usize..4, nx in 1usize..4) {
        let stack = coded(h, w);
        let tiled = tile_stack(&stack, ny, nx);
        prop_assert_eq!((tiled.height(), tiled.width()), (ny * h, nx * w));
        for y in 0..ny * h {
            for x in 0..nx * w {
                prop_assert_eq!(decode(&tiled, y, x), decode(&stack, y % h, x % w));
            }
        }
    }

    #[test]
    fn center_crop_matches_index_oracle(h in 2usize..60, w in 2usize..60) {
        let stack = coded(h, w);
        let c = center_crop(&stack, 0.5).unwrap();
        let (ch, cw) = (h / 2, w / 2);
        prop_assert_eq!((c.height(), c.width()), (ch, cw));
        let (oy, ox) = ((h - ch) / 2, (w - cw) / 2);
        for y in 0..ch {
            for x in 0..cw {
                prop_assert_eq!(decode(&c, y, x), decode(&stack, y + oy, x + ox));
            }
        }
    }

    #[test]
    fn normal_shift_wraps(h in 1usize..20, w in 1usize..20, dy in 0usize..40, dx in 0usize..40) {
        let stack = coded(h, w);
        let shifted = stack.shift_normals(dy, dx);
        prop_assert_eq!(shifted.albedo(), stack.albedo());
        for y in 0..h {
            for x in 0..w {
                let src = decode(&stack, (y + h - dy % h) % h, (x + w - dx % w) % w).1;
                prop_assert_eq!(decode(&shifted, y, x).1, src);
            }
        }
    }
}
