//! Stepwise-extension view of the measurement.
//!
//! Adding apparatus steps one at a time, the `+` share of the partial rate,
//! `p_n = |ψ₊|²B⁺_n / (|ψ₊|²B⁺_n + |ψ₋|²B⁻_n)` with `B^j_n = ∏_{m≤n}(1 + jε_mκ)`,
//! performs a random walk on `[0, 1]`. Under the physical measure it is a
//! bounded martingale, so it converges, and for large `Ξ` it ends next to 0
//! or 1 with probabilities `|ψ₋|²` and `|ψ₊|²`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::model::{y_from_z, EpsilonConfig, ModelParams, Outcome, QubitState};
use crate::numeric::CompensatedSum;
use crate::rng::{substream, with_workers, StreamDomain};
use crate::sampler::{step_probabilities, Histogram, PhysicalWalk};

/// `p_{n+1} = p(1+εκ) / (p(1+εκ) + (1−p)(1−εκ))`.
pub fn trajectory_step(p: f64, epsilon: i8, kappa: f64) -> f64 {
    let e = epsilon as f64 * kappa;
    let up = p * (1.0 + e);
    let down = (1.0 - p) * (1.0 - e);
    up / (up + down)
}

/// `E[p_{n+1} | p_n] − p_n` under the physical step law; zero up to rounding.
pub fn martingale_residual(p: f64, kappa: f64) -> f64 {
    let (up, down) = step_probabilities(p, kappa);
    up * trajectory_step(p, 1, kappa) + down * trajectory_step(p, -1, kappa) - p
}

/// Largest `|martingale_residual|` over a `p_points × kappa_points` grid on `[0,1] × (0, max_kappa]`.
pub fn max_martingale_residual(p_points: usize, kappa_points: usize, max_kappa: f64) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..p_points {
        let p = if p_points == 1 { 0.5 } else { i as f64 / (p_points - 1) as f64 };
        for k in 1..=kappa_points {
            let kappa = max_kappa * k as f64 / kappa_points as f64;
            worst = worst.max(martingale_residual(p, kappa).abs());
        }
    }
    worst
}

/// Applies [`trajectory_step`] along a fixed configuration, returning `p_0..p_N`.
pub fn replay(config: &EpsilonConfig, params: &ModelParams, psi: &QubitState) -> Result<Vec<f64>> {
    if config.len() != params.n_steps() {
        return Err(ModelError::LengthMismatch { expected: params.n_steps(), actual: config.len() });
    }
    let mut p = psi.weight(Outcome::Plus);
    let mut path = Vec::with_capacity(config.len() + 1);
    path.push(p);
    for &s in config.steps() {
        p = trajectory_step(p, s, params.kappa());
        path.push(p);
    }
    Ok(path)
}

/// One sampled conditional-probability path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial_p: f64,
    pub final_p: f64,
    pub z: i64,
    pub final_y: f64,
    /// `p_0..p_N`, kept only when requested.
    pub path: Option<Vec<f64>>,
}

/// Samples steps under the physical measure while tracking `p_n`.
///
/// Consumes the generator exactly as [`crate::sampler::sample_physical_config`]
/// does, so the same substream yields the same configuration.
pub fn sample_trajectory<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ModelParams,
    psi: &QubitState,
    keep_path: bool,
) -> Trajectory {
    let mut walk = PhysicalWalk::new(params, psi);
    let initial_p = psi.weight(Outcome::Plus);
    let mut path = keep_path.then(|| {
        let mut v = Vec::with_capacity(params.n_steps() + 1);
        v.push(initial_p);
        v
    });
    for _ in 0..params.n_steps() {
        walk.step(rng);
        if let Some(v) = path.as_mut() {
            v.push(walk.p_plus());
        }
    }
    Trajectory { initial_p, final_p: walk.p_plus(), z: walk.z(), final_y: y_from_z(walk.z(), params), path }
}

/// Trajectory `index` of the run seeded with `seed`.
pub fn trajectory_record(seed: u64, index: u64, params: &ModelParams, psi: &QubitState, keep_path: bool) -> Trajectory {
    sample_trajectory(&mut substream(seed, StreamDomain::Physical, index), params, psi, keep_path)
}

/// Terminal statistics of a batch of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub n_trajectories: u64,
    pub initial_p: f64,
    pub mean_final_p: f64,
    pub standard_error: f64,
    /// Fraction with `p_N > 0.99`.
    pub fraction_plus: f64,
    /// Fraction with `p_N < 0.01`.
    pub fraction_minus: f64,
    /// Fraction with `p_N ∈ [0.01, 0.99]`.
    pub fraction_undecided: f64,
    pub terminal_histogram: Histogram,
}

/// Runs `n` trajectories and summarizes their endpoints. Per-trajectory values
/// are collected in index order before reduction, so the result does not
/// depend on `workers`.
pub fn run_trajectories(
    seed: u64,
    params: &ModelParams,
    psi: &QubitState,
    n: usize,
    workers: usize,
    bins: usize,
) -> Result<TrajectorySummary> {
    if n == 0 {
        return Err(ModelError::NoSamples);
    }
    let finals: Vec<f64> = with_workers(workers, || {
        (0..n as u64).into_par_iter().map(|i| trajectory_record(seed, i, params, psi, false).final_p).collect()
    });
    let mut hist = Histogram::uniform(0.0, 1.0, bins)?;
    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    let (mut plus, mut minus) = (0u64, 0u64);
    for &p in &finals {
        // p = 1 belongs in the last bin.
        hist.add(if p >= 1.0 { 1.0 - f64::EPSILON } else { p });
        sum.add(p);
        sum_sq.add(p * p);
        if p > 0.99 {
            plus += 1;
        } else if p < 0.01 {
            minus += 1;
        }
    }
    let nf = n as f64;
    let mean = sum.value() / nf;
    let var = (sum_sq.value() / nf - mean * mean).max(0.0);
    Ok(TrajectorySummary {
        n_trajectories: n as u64,
        initial_p: psi.weight(Outcome::Plus),
        mean_final_p: mean,
        standard_error: (var / nf).sqrt(),
        fraction_plus: plus as f64 / nf,
        fraction_minus: minus as f64 / nf,
        fraction_undecided: (n as u64 - plus - minus) as f64 / nf,
        terminal_histogram: hist,
    })
}
