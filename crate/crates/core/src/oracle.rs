//! Exhaustive enumeration of all `2ᴺ` apparatus configurations.
//!
//! For `N ≤ 16` every expectation over the uniform ensemble is a finite sum,
//! so mean rates, the exact finite-`N` Born probability and the full physical
//! distribution `2⁻ᴺw(ε)` are computed without sampling error. This module is
//! the ground truth the sampler is checked against.
//!
//! Configurations are visited in Gray-code order so that the `+` count
//! changes by one between neighbours; rates depend on `ε` only through that
//! count and are read from precomputed tables.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::model::{EpsilonConfig, ModelParams, Outcome, QubitState};
use crate::numeric::CompensatedSum;
use crate::rng::{substream, with_workers, StreamDomain};
use crate::sampler::{chunk_ranges, sample_physical_config};

/// Largest step count the enumeration accepts.
pub const MAX_ENUMERATION_STEPS: usize = 16;

/// Configurations summed per block. Blocks are fixed so that parallel and
/// sequential runs add the same partial sums in the same order.
const BLOCK_BITS: u32 = 10;

/// Probability of one value of `Z` under both ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZProbability {
    pub z: i64,
    pub uniform: f64,
    pub physical: f64,
}

/// Exact expectations over the full configuration space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport {
    pub n_steps: usize,
    pub kappa: f64,
    pub psi_plus_sq: f64,
    /// `⟨w⟩` over the uniform ensemble.
    pub mean_w: f64,
    /// `⟨|b⁽⁺⁾|²⟩`.
    pub mean_rate_plus: f64,
    /// `⟨|b⁽⁻⁾|²⟩`.
    pub mean_rate_minus: f64,
    /// `Σ 2⁻ᴺ w(ε) p₊(ε)`.
    pub exact_p_plus: f64,
    /// Ascending in `z`.
    pub z_distribution: Vec<ZProbability>,
    /// `2⁻ᴺ w(ε)`, indexed by the bit mask of `ε` (bit `n` set ⇔ `ε_{n+1} = +1`).
    pub config_weights: Vec<f64>,
}

/// Sums of one block plus its `(mask, count_plus, weight)` entries.
type BlockResult = (BlockSums, Vec<(u64, usize, f64)>);

#[derive(Default)]
struct BlockSums {
    w: CompensatedSum,
    rate_plus: CompensatedSum,
    rate_minus: CompensatedSum,
    born_plus: CompensatedSum,
}

impl BlockSums {
    fn merge(&mut self, other: &BlockSums) {
        self.w.merge(&other.w);
        self.rate_plus.merge(&other.rate_plus);
        self.rate_minus.merge(&other.rate_minus);
        self.born_plus.merge(&other.born_plus);
    }
}

/// Enumerates every configuration of `params`, in parallel when `workers != 1`.
pub fn enumerate_all(params: &ModelParams, psi: &QubitState) -> Result<ExactReport> {
    enumerate_all_with_workers(params, psi, 0)
}

pub fn enumerate_all_with_workers(params: &ModelParams, psi: &QubitState, workers: usize) -> Result<ExactReport> {
    let n = params.n_steps();
    if n > MAX_ENUMERATION_STEPS {
        return Err(ModelError::Capacity { requested: n, max: MAX_ENUMERATION_STEPS });
    }
    let kappa = params.kappa();
    let total = 1u64 << n;
    let scale = 1.0 / total as f64;
    let weight_plus = psi.weight(Outcome::Plus);
    let weight_minus = psi.weight(Outcome::Minus);

    // |b^{(+)}|² with k plus-steps; |b^{(−)}|² with k plus-steps is rate_plus[n − k].
    let rate_plus: Vec<f64> =
        (0..=n).map(|k| (k as f64 * kappa.ln_1p() + (n - k) as f64 * (-kappa).ln_1p()).exp()).collect();

    let block = 1u64 << BLOCK_BITS.min(n as u32);
    let blocks = total / block;

    let partials: Vec<BlockResult> = with_workers(workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut sums = BlockSums::default();
                let mut visited = Vec::with_capacity(block as usize);
                let start = b * block;
                let mut gray = start ^ (start >> 1);
                let mut k = gray.count_ones() as usize;
                for i in start..start + block {
                    if i != start {
                        let flip = 1u64 << i.trailing_zeros();
                        gray ^= flip;
                        if gray & flip != 0 {
                            k += 1;
                        } else {
                            k -= 1;
                        }
                    }
                    let bp = rate_plus[k];
                    let bm = rate_plus[n - k];
                    let branch_plus = weight_plus * bp;
                    let w = branch_plus + weight_minus * bm;
                    let p_plus = if w > 0.0 { branch_plus / w } else { 0.0 };
                    sums.w.add(w);
                    sums.rate_plus.add(bp);
                    sums.rate_minus.add(bm);
                    sums.born_plus.add(w * p_plus);
                    visited.push((gray, k, scale * w));
                }
                (sums, visited)
            })
            .collect()
    });

    let mut sums = BlockSums::default();
    let mut config_weights = vec![0.0; total as usize];
    let mut z_uniform = vec![CompensatedSum::new(); n + 1];
    let mut z_physical = vec![CompensatedSum::new(); n + 1];
    for (block_sums, visited) in &partials {
        sums.merge(block_sums);
        for &(mask, k, weight) in visited {
            config_weights[mask as usize] = weight;
            z_uniform[k].add(scale);
            z_physical[k].add(weight);
        }
    }
    let z_distribution = (0..=n)
        .map(|k| ZProbability {
            z: 2 * k as i64 - n as i64,
            uniform: z_uniform[k].value(),
            physical: z_physical[k].value(),
        })
        .collect();

    Ok(ExactReport {
        n_steps: n,
        kappa,
        psi_plus_sq: weight_plus,
        mean_w: scale * sums.w.value(),
        mean_rate_plus: scale * sums.rate_plus.value(),
        mean_rate_minus: scale * sums.rate_minus.value(),
        exact_p_plus: scale * sums.born_plus.value(),
        z_distribution,
        config_weights,
    })
}

/// Exact invariants a report must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub tolerance: f64,
    pub mean_w_error: f64,
    pub mean_rate_plus_error: f64,
    pub mean_rate_minus_error: f64,
    pub born_error: f64,
    pub uniform_total_error: f64,
    pub physical_total_error: f64,
    pub passed: bool,
}

impl ExactReport {
    pub fn check_invariants(&self, tolerance: f64) -> InvariantCheck {
        let uniform: CompensatedSum = self.z_distribution.iter().map(|z| z.uniform).collect();
        let physical: CompensatedSum = self.z_distribution.iter().map(|z| z.physical).collect();
        let errors = [
            (self.mean_w - 1.0).abs(),
            (self.mean_rate_plus - 1.0).abs(),
            (self.mean_rate_minus - 1.0).abs(),
            (self.exact_p_plus - self.psi_plus_sq).abs(),
            (uniform.value() - 1.0).abs(),
            (physical.value() - 1.0).abs(),
        ];
        InvariantCheck {
            tolerance,
            mean_w_error: errors[0],
            mean_rate_plus_error: errors[1],
            mean_rate_minus_error: errors[2],
            born_error: errors[3],
            uniform_total_error: errors[4],
            physical_total_error: errors[5],
            passed: errors.iter().all(|&e| e <= tolerance),
        }
    }
}

/// Sampled configuration counts, indexed like [`ExactReport::config_weights`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub n_steps: usize,
    pub kappa: f64,
    pub counts: Vec<u64>,
}

impl EmpiricalDistribution {
    pub fn new(n_steps: usize, kappa: f64) -> Result<Self> {
        if n_steps > MAX_ENUMERATION_STEPS {
            return Err(ModelError::Capacity { requested: n_steps, max: MAX_ENUMERATION_STEPS });
        }
        Ok(Self { n_steps, kappa, counts: vec![0; 1 << n_steps] })
    }

    pub fn add(&mut self, config: &EpsilonConfig) -> Result<()> {
        if config.len() != self.n_steps {
            return Err(ModelError::LengthMismatch { expected: self.n_steps, actual: config.len() });
        }
        let mask = config.to_bits().expect("at most 16 steps");
        self.counts[mask as usize] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts of `n` physical draws seeded with `seed`.
    pub fn sample_physical(
        params: &ModelParams,
        psi: &QubitState,
        seed: u64,
        n: usize,
        workers: usize,
    ) -> Result<Self> {
        let n_steps = params.n_steps();
        let mut dist = Self::new(n_steps, params.kappa())?;
        let partials: Vec<Vec<u64>> = with_workers(workers, || {
            chunk_ranges(n)
                .into_par_iter()
                .map(|(start, end)| {
                    let mut counts = vec![0u64; 1 << n_steps];
                    for i in start..end {
                        let config =
                            sample_physical_config(&mut substream(seed, StreamDomain::Physical, i as u64), params, psi);
                        counts[config.to_bits().expect("at most 16 steps") as usize] += 1;
                    }
                    counts
                })
                .collect()
        });
        for part in &partials {
            dist.counts.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        Ok(dist)
    }
}

/// Distance between a sampled distribution and the exact one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub n_samples: u64,
    pub total_variation: f64,
    /// `3·√(K / 4n)` for `K` configurations.
    pub total_variation_bound: f64,
    /// Largest `|f_Z − P_Z|` over values of `Z`.
    pub max_z_deviation: f64,
    /// Configuration masks whose frequency is more than 3σ from the exact weight.
    pub flagged_configs: Vec<u64>,
    /// Values of `Z` whose frequency is more than 3σ from the exact probability.
    pub flagged_z: Vec<i64>,
    pub passed: bool,
}

fn outside_three_sigma(freq: f64, p: f64, n: f64) -> bool {
    let sigma = (p * (1.0 - p) / n).sqrt();
    (freq - p).abs() > 3.0 * sigma
}

pub fn compare_sampler(report: &ExactReport, empirical: &EmpiricalDistribution) -> Result<DivergenceReport> {
    if report.n_steps != empirical.n_steps {
        return Err(ModelError::ParamMismatch(format!(
            "report has N = {}, sample has N = {}",
            report.n_steps, empirical.n_steps
        )));
    }
    if report.kappa != empirical.kappa {
        return Err(ModelError::ParamMismatch(format!(
            "report has kappa = {}, sample has kappa = {}",
            report.kappa, empirical.kappa
        )));
    }
    let n = empirical.total();
    if n == 0 {
        return Err(ModelError::NoSamples);
    }
    let nf = n as f64;
    let mut tv = CompensatedSum::new();
    let mut flagged_configs = Vec::new();
    let mut z_counts = vec![0u64; report.n_steps + 1];
    for (mask, (&count, &p)) in empirical.counts.iter().zip(&report.config_weights).enumerate() {
        let f = count as f64 / nf;
        tv.add((f - p).abs());
        if outside_three_sigma(f, p, nf) {
            flagged_configs.push(mask as u64);
        }
        z_counts[(mask as u64).count_ones() as usize] += count;
    }
    let mut max_z_deviation = 0.0_f64;
    let mut flagged_z = Vec::new();
    for (zp, &count) in report.z_distribution.iter().zip(&z_counts) {
        let f = count as f64 / nf;
        max_z_deviation = max_z_deviation.max((f - zp.physical).abs());
        if outside_three_sigma(f, zp.physical, nf) {
            flagged_z.push(zp.z);
        }
    }
    let total_variation = 0.5 * tv.value();
    let total_variation_bound = 3.0 * (report.config_weights.len() as f64 / (4.0 * nf)).sqrt();
    Ok(DivergenceReport {
        n_samples: n,
        total_variation,
        total_variation_bound,
        max_z_deviation,
        flagged_configs,
        flagged_z,
        passed: total_variation <= total_variation_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi64() -> QubitState {
        QubitState::from_probability(0.6, 0.0).unwrap()
    }

    #[test]
    fn capacity_error_points_to_sampler() {
        let params = ModelParams::new(0.1, 17).unwrap();
        let err = enumerate_all(&params, &psi64()).unwrap_err();
        assert_eq!(err, ModelError::Capacity { requested: 17, max: 16 });
        assert!(err.to_string().contains("sampler"));
    }

    #[test]
    fn small_case_matches_hand_sum() {
        // N = 2, κ = 0.1, ψ² = (0.6, 0.4): w over (++, +-, -+, --).
        let params = ModelParams::new(0.1, 2).unwrap();
        let r = enumerate_all(&params, &psi64()).unwrap();
        let w = [0.6 * 0.81 + 0.4 * 1.21, 0.99, 0.99, 0.6 * 1.21 + 0.4 * 0.81];
        // masks: 0 = (−,−), 1 = (+,−), 2 = (−,+), 3 = (+,+)
        for (mask, &expected) in w.iter().enumerate() {
            assert!((r.config_weights[mask] - expected / 4.0).abs() < 1e-15);
        }
        assert!((r.mean_w - 1.0).abs() < 1e-15);
        assert_eq!(r.z_distribution.iter().map(|z| z.z).collect::<Vec<_>>(), vec![-2, 0, 2]);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let params = ModelParams::new(0.17, 14).unwrap();
        let a = enumerate_all_with_workers(&params, &psi64(), 1).unwrap();
        let b = enumerate_all_with_workers(&params, &psi64(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_distribution_has_zero_distance() {
        let params = ModelParams::new(0.2, 3).unwrap();
        let psi = QubitState::from_probability(0.5, 0.0).unwrap();
        let r = enumerate_all(&params, &psi).unwrap();
        // ψ² = ½ makes w(ε) symmetric; pick n so every n·2⁻ᴺw is an integer.
        let n = 1_000_000u64;
        let counts: Vec<u64> = r.config_weights.iter().map(|&p| (p * n as f64).round() as u64).collect();
        let emp = EmpiricalDistribution { n_steps: 3, kappa: 0.2, counts };
        let d = compare_sampler(&r, &emp).unwrap();
        assert!(d.total_variation < 1e-12);
        assert!(d.passed && d.flagged_configs.is_empty());
    }

    #[test]
    fn mismatched_params_rejected() {
        let r = enumerate_all(&ModelParams::new(0.2, 3).unwrap(), &psi64()).unwrap();
        let emp = EmpiricalDistribution::new(4, 0.2).unwrap();
        assert!(matches!(compare_sampler(&r, &emp), Err(ModelError::ParamMismatch(_))));
        let emp = EmpiricalDistribution::new(3, 0.25).unwrap();
        assert!(matches!(compare_sampler(&r, &emp), Err(ModelError::ParamMismatch(_))));
        let emp = EmpiricalDistribution::new(3, 0.2).unwrap();
        assert_eq!(compare_sampler(&r, &emp), Err(ModelError::NoSamples));
    }
}
