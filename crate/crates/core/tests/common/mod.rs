//! Shared fixtures for integration tests.
#![allow(dead_code)]

pub mod oracles;

use tilesynth_core::trainer::TrainConfig;
use tilesynth_core::TextureStack;

pub const TOY_PERIOD: usize = 32;

/// Periodic height field: a lattice of small bumps plus a faint diagonal
/// ridge, both repeating every `TOY_PERIOD` pixels.
fn height(y: f64, x: f64) -> f64 {
    let p = TOY_PERIOD as f64;
    let wrap = |v: f64| {
        let r = v.rem_euclid(p);
        r.min(p - r)
    };
    let (dy, dx) = (wrap(y - 8.0), wrap(x - 8.0));
    let bump = (-(dy * dy + dx * dx) / (2.0 * 3.0 * 3.0)).exp();
    let ridge = 0.5 * (std::f64::consts::TAU * (x + y) / p).cos().max(0.0).powi(8);
    bump + ridge
}

/// 256x256 toy stack: dark albedo with bright dots, normals derived from the
/// same height field so the two maps are pixel-aligned.
pub fn toy_stack(side: usize) -> TextureStack {
    TextureStack::from_fn(side, side, |y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let h = height(yf, xf);
        let albedo = [0.12 + 0.8 * h, 0.10 + 0.6 * h, 0.08 + 0.3 * h];
        let e = 0.5;
        let gx = (height(yf, xf + e) - height(yf, xf - e)) / (2.0 * e);
        let gy = (height(yf + e, xf) - height(yf - e, xf)) / (2.0 * e);
        let strength = 4.0;
        let (nx, ny, nz) = (-gx * strength, -gy * strength, 1.0);
        let len = (nx * nx + ny * ny + nz * nz).sqrt();
        let enc = |v: f64| ((v / len) * 0.5 + 0.5) as f32;
        (
            albedo.map(|v| v.clamp(0.0, 1.0) as f32),
            [enc(nx), enc(ny), enc(nz)],
        )
    })
    .expect("valid fixture")
}

/// Narrow networks so a 2000-iteration toy run fits a single CPU core in
/// well under 15 minutes.
pub fn toy_config(iterations: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        k: 64,
        iterations,
        seed,
        ..TrainConfig::default()
    };
    cfg.generator.base_channels = 12;
    cfg.generator.num_residual_blocks = 3;
    cfg.discriminator.base_channels = 8;
    cfg
}
