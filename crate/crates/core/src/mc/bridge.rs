//! Brownian-bridge samplers for `Y_λ = ∫_0^1 e^{λB(x)} dx`.
//!
//! A bridge on `2M` uniform intervals is built exactly as `W_k - (k/2M) W_{2M}`
//! from a random walk with `N(0, 1/2M)` steps. Every path yields trapezoid
//! values on both the fine grid and the coarse grid of its even nodes, so the
//! two resolutions are compared on the same randomness.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::she::replica_rng;
use crate::error::{Error, Result};
use crate::stats::{MeanEstimate, Welford};

/// Paths per independent RNG stream.
const BLOCK: usize = 4096;

/// Fills `path[k] = B(k / len)` for `k = 0..=len`.
fn sample_bridge<R: Rng>(rng: &mut R, path: &mut [f64]) {
    let len = path.len() - 1;
    let sd = (1.0 / len as f64).sqrt();
    path[0] = 0.0;
    for k in 1..=len {
        let z: f64 = rng.sample(StandardNormal);
        path[k] = path[k - 1] + sd * z;
    }
    let end = path[len];
    for (k, p) in path.iter_mut().enumerate() {
        *p -= end * k as f64 / len as f64;
    }
}

/// Trapezoid values of `∫ e^{λB}` on the fine grid and on its even nodes.
fn exponential_functional(lambda: f64, path: &[f64]) -> (f64, f64) {
    let len = path.len() - 1;
    let (mut odd, mut even) = (0.0, 0.0);
    for (k, &b) in path.iter().enumerate().take(len).skip(1) {
        let e = (lambda * b).exp();
        if k % 2 == 0 {
            even += e;
        } else {
            odd += e;
        }
    }
    let h = 1.0 / len as f64;
    (h * (1.0 + odd + even), 2.0 * h * (1.0 + even))
}

fn check_sizes(grid_points: usize, samples: usize) -> Result<()> {
    if grid_points < 64 {
        return Err(Error::InvalidParameter(format!(
            "M must be at least 64, got {grid_points}"
        )));
    }
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "at least 10⁴ samples are required, got {samples}"
        )));
    }
    Ok(())
}

/// Runs `samples` paths on `2M` intervals in blocks of independent streams
/// and merges the per-block accumulators in block order.
fn blocked<const K: usize>(
    grid_points: usize,
    samples: usize,
    seed: u64,
    per_path: impl Fn(&[f64]) -> [f64; K] + Sync,
) -> [Welford; K] {
    let blocks = samples.div_ceil(BLOCK);
    let partial: Vec<[Welford; K]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(seed, b as u64);
            let mut path = vec![0.0; 2 * grid_points + 1];
            let mut acc = [Welford::default(); K];
            let count = BLOCK.min(samples - b * BLOCK);
            for _ in 0..count {
                sample_bridge(&mut rng, &mut path);
                for (a, v) in acc.iter_mut().zip(per_path(&path)) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = [Welford::default(); K];
    for p in &partial {
        for (t, a) in total.iter_mut().zip(p) {
            t.merge(a);
        }
    }
    total
}

/// Monte Carlo estimate of `E Y_λ^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgeEstimate {
    pub lambda: f64,
    pub grid_points: usize,
    pub samples: usize,
    /// Richardson combination `2·fine - coarse`, which removes the `O(1/M)`
    /// trapezoid bias.
    pub mean: f64,
    pub stderr: f64,
    /// Trapezoid on `M` intervals.
    pub coarse: MeanEstimate,
    /// Trapezoid on `2M` intervals.
    pub fine: MeanEstimate,
}

/// `E Y_λ^{-2}` from `samples` bridges on `M` and `2M` intervals.
///
/// Fails with a discretization error when the `M` and `2M` estimates differ by
/// more than their combined standard error.
pub fn bridge_inverse_square_mc(
    lambda: f64,
    grid_points: usize,
    samples: usize,
    seed: u64,
) -> Result<BridgeEstimate> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "λ must be finite, got {lambda}"
        )));
    }
    check_sizes(grid_points, samples)?;
    if lambda == 0.0 {
        let exact = MeanEstimate {
            mean: 1.0,
            stderr: 0.0,
            count: samples,
        };
        return Ok(BridgeEstimate {
            lambda,
            grid_points,
            samples,
            mean: 1.0,
            stderr: 0.0,
            coarse: exact,
            fine: exact,
        });
    }
    let [fine, coarse, combined] = blocked(grid_points, samples, seed, |path| {
        let (f, c) = exponential_functional(lambda, path);
        let (f, c) = (f.powi(-2), c.powi(-2));
        [f, c, 2.0 * f - c]
    });
    let (fine, coarse, combined) = (fine.estimate(), coarse.estimate(), combined.estimate());
    let difference = (fine.mean - coarse.mean).abs();
    let stderr = fine.stderr.hypot(coarse.stderr);
    if difference >= stderr {
        return Err(Error::Discretization {
            grid_points,
            difference,
            stderr,
        });
    }
    Ok(BridgeEstimate {
        lambda,
        grid_points,
        samples,
        mean: combined.mean,
        stderr: combined.stderr,
        coarse,
        fine,
    })
}

/// Independent draws of `Y_λ` (trapezoid on `M` intervals).
pub fn sample_exponential_functional(
    lambda: f64,
    grid_points: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_sizes(grid_points, samples)?;
    let blocks = samples.div_ceil(BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(seed, b as u64);
            let mut path = vec![0.0; grid_points + 1];
            let count = BLOCK.min(samples - b * BLOCK);
            (0..count)
                .map(|_| {
                    sample_bridge(&mut rng, &mut path);
                    let inner: f64 = path[1..grid_points]
                        .iter()
                        .map(|&x| (lambda * x).exp())
                        .sum();
                    (1.0 + inner) / grid_points as f64
                })
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// Trapezoid values of `I_p = ∫_0^1 B^p`, `p = 1..4`.
fn bridge_moments(path: &[f64], stride: usize) -> [f64; 4] {
    let len = (path.len() - 1) / stride;
    let mut s = [0.0; 4];
    for k in 1..len {
        let b = path[k * stride];
        let b2 = b * b;
        s[0] += b;
        s[1] += b2;
        s[2] += b2 * b;
        s[3] += b2 * b2;
    }
    s.map(|v| v / len as f64)
}

/// The `λ²` and `λ⁴` Taylor coefficients of `Y_λ^{-2}` for one path, from
/// `Y = 1 + ε` and `(1+ε)^{-2} = 1 - 2ε + 3ε² - 4ε³ + 5ε⁴ - …`.
fn series_terms(i: [f64; 4]) -> (f64, f64) {
    let [i1, i2, i3, i4] = i;
    let c2 = -i2 + 3.0 * i1 * i1;
    let c4 = -i4 / 12.0 + i1 * i3 + 0.75 * i2 * i2 - 6.0 * i1 * i1 * i2 + 5.0 * i1.powi(4);
    (c2, c4)
}

/// Monte Carlo values of the series coefficients of `E Y_λ^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesCoefficientMc {
    pub grid_points: usize,
    pub samples: usize,
    /// On `2M` intervals.
    pub a2: MeanEstimate,
    pub a4: MeanEstimate,
    /// Paired mean of `a₄(2M) - a₄(M)`.
    pub a4_refinement: MeanEstimate,
    /// `stderr ⊕ |refinement|`.
    pub a4_uncertainty: f64,
}

/// Estimates `a₂` and `a₄` by averaging the per-path Taylor coefficients.
pub fn series_coefficients_mc(
    grid_points: usize,
    samples: usize,
    seed: u64,
) -> Result<SeriesCoefficientMc> {
    check_sizes(grid_points, samples)?;
    let [a2, a4, refinement] = blocked(grid_points, samples, seed, |path| {
        let (f2, f4) = series_terms(bridge_moments(path, 1));
        let (_, c4) = series_terms(bridge_moments(path, 2));
        [f2, f4, f4 - c4]
    });
    let (a2, a4, refinement) = (a2.estimate(), a4.estimate(), refinement.estimate());
    Ok(SeriesCoefficientMc {
        grid_points,
        samples,
        a2,
        a4,
        a4_refinement: refinement,
        a4_uncertainty: a4.stderr.hypot(refinement.mean.abs()),
    })
}
