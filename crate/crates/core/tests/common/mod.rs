//! Seeded random smooth states shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wireflow::grid::Grid;
use wireflow::{AngleDensityState, Field, ModelParams, StiffnessProfile};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_beta(rng: &mut ChaCha8Rng) -> StiffnessProfile {
    match rng.gen_range(0..4) {
        0 => StiffnessProfile::Constant { a: rng.gen_range(0.5..2.0) },
        1 => StiffnessProfile::Exponential { a: rng.gen_range(0.5..1.5), b: rng.gen_range(-1.0..1.0) },
        2 => StiffnessProfile::GaussianBump {
            a: rng.gen_range(0.8..1.5),
            b: rng.gen_range(-0.5..0.5),
            c: rng.gen_range(0.5..3.0),
            x0: rng.gen_range(-0.3..0.3),
        },
        _ => StiffnessProfile::PolynomialPositive {
            coeffs: vec![1.0, rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
        },
    }
}

/// Periodic trigonometric polynomial with modes 1..=3 and the given amplitude scale.
pub fn random_periodic(rng: &mut ChaCha8Rng, grid: Grid, scale: f64) -> Field {
    let k = 2.0 * PI / grid.length();
    let coeffs: Vec<(f64, f64)> = (1..=3)
        .map(|m| {
            let s = scale / m as f64;
            (rng.gen_range(-s..s), rng.gen_range(-s..s))
        })
        .collect();
    grid.sample(|s| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let w = (j + 1) as f64 * k * s;
                a * w.sin() + b * w.cos()
            })
            .sum()
    })
}

/// Smooth, generally non-closed state with random model parameters.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> (AngleDensityState, ModelParams) {
    let length = 2.0 * PI * rng.gen_range(0.5..2.0);
    let grid = Grid::new(length, n).unwrap();
    let omega = rng.gen_range(-1..=2i64);
    let base = 2.0 * PI * omega as f64 / length;
    let wiggle = random_periodic(rng, grid, 0.4);
    let offset = rng.gen_range(-PI..PI);
    let theta = wiggle.zip_map(&grid.sample(|s| base * s), |w, b| w + b + offset);
    let mean = rng.gen_range(-0.3..0.3);
    let rho = random_periodic(rng, grid, 0.3).map(|r| r + mean);
    let params = ModelParams {
        length,
        mu: rng.gen_range(0.2..2.0),
        c0: rng.gen_range(-1.0..1.0),
        omega,
        beta: random_beta(rng),
        mass: 0.0,
    };
    (AngleDensityState::new(theta, rho, omega, 0.0).unwrap(), params)
}
