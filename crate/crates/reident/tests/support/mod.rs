//! Shared test oracles and data helpers.
//!
//! Compiled once per integration-test target; not every target uses every
//! helper, so dead-code lints are suppressed for the module.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use reident::dtw::{DistanceNormalization, DtwConfig, StepPattern};

/// Exhaustive DTW reference: enumerates every monotone warping path and
/// minimizes (cost, cell count) lexicographically — the same tie policy as
/// the dynamic program, so symmetric1 path normalization agrees exactly.
///
/// Exponential in the series lengths; only usable for lengths up to ~8.
pub fn oracle_dtw(x: &[f64], y: &[f64], config: &DtwConfig) -> f64 {
    assert!(!x.is_empty() && !y.is_empty());
    let diag_weight = match config.step_pattern {
        StepPattern::Symmetric1 => 1.0,
        StepPattern::Symmetric2 => 2.0,
    };
    let band = config.window_constraint.unwrap_or(usize::MAX);
    let mut best: (f64, u64) = (f64::INFINITY, u64::MAX);
    let start_cost = diag_weight * (x[0] - y[0]).abs();
    dfs(x, y, 0, 0, start_cost, 1, diag_weight, band, &mut best);
    assert!(best.0.is_finite(), "no feasible path in oracle");
    match config.distance_normalization {
        DistanceNormalization::None => best.0,
        DistanceNormalization::PathNormalized => match config.step_pattern {
            StepPattern::Symmetric2 => best.0 / (x.len() + y.len()) as f64,
            StepPattern::Symmetric1 => best.0 / best.1 as f64,
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    x: &[f64],
    y: &[f64],
    i: usize,
    j: usize,
    cost: f64,
    cells: u64,
    diag_weight: f64,
    band: usize,
    best: &mut (f64, u64),
) {
    if i == x.len() - 1 && j == y.len() - 1 {
        if cost < best.0 || (cost == best.0 && cells < best.1) {
            *best = (cost, cells);
        }
        return;
    }
    let step = |ni: usize, nj: usize, w: f64, best: &mut (f64, u64)| {
        if ni < x.len() && nj < y.len() && ni.abs_diff(nj) <= band {
            let c = (x[ni] - y[nj]).abs();
            dfs(x, y, ni, nj, cost + w * c, cells + 1, diag_weight, band, best);
        }
    };
    step(i + 1, j + 1, diag_weight, best);
    step(i + 1, j, 1.0, best);
    step(i, j + 1, 1.0, best);
}

/// Series with values on a coarse dyadic grid (multiples of 0.25), so every
/// path cost is an exact binary float and cost ties are exact in both the
/// oracle and the dynamic program regardless of summation order.
pub fn dyadic_series(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-8i32..=8) as f64 * 0.25).collect()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
