//! Monte Carlo sampling of apparatus configurations and measurement outcomes.
//!
//! Two ensembles are sampled. The uniform ensemble draws every `ε_n` as a fair
//! coin. The physical ensemble weights each configuration by its transition
//! rate, `P(ε) = 2⁻ᴺ·w(ε)`; since `w` spans `e^{±Nκ}`, rejection against the
//! uniform ensemble is hopeless, so configurations are built step by step
//! from the exact chain-rule factorization
//!
//! ```text
//! P(ε_{n+1} = s | ε_1..ε_n) = w_{n+1}(s) / (2·w_n)
//!                           = ½·(1 + s·κ·(2p_n − 1))
//! ```
//!
//! where `p_n = |ψ₊|²B⁺_n / w_n` is the running `+` share of the partial
//! rate `w_n`. `p_n` is carried as a log-odds so that it never saturates
//! prematurely.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::model::{rates_from_count, y_from_z, EpsilonConfig, ModelParams, Outcome, QubitState, RateMode};
use crate::numeric::logistic;
use crate::rng::{substream, with_workers, StreamDomain};

/// Default half-width of the unclassified band around `Y = 0`.
pub const DEFAULT_DEAD_ZONE: f64 = 0.5;

/// Records processed per parallel work unit. Fixed, so partial results never
/// depend on the worker count.
const CHUNK: usize = 4096;

/// Subensemble membership of a sampled configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Subensemble {
    OmegaPlus,
    OmegaMinus,
    Unclassified,
}

/// `OmegaPlus` for `y ≥ dead_zone`, `OmegaMinus` for `y ≤ −dead_zone`.
pub fn classify_y(y: f64, dead_zone: f64) -> Subensemble {
    if y >= dead_zone && y > 0.0 {
        Subensemble::OmegaPlus
    } else if y <= -dead_zone && y < 0.0 {
        Subensemble::OmegaMinus
    } else {
        Subensemble::Unclassified
    }
}

pub fn classify_subensemble(record: &MeasurementRecord, dead_zone: f64) -> Result<Subensemble> {
    if !(0.0..1.0).contains(&dead_zone) {
        return Err(ModelError::InvalidDeadZone(dead_zone));
    }
    Ok(classify_y(record.y, dead_zone))
}

/// How the outcome is assigned once a configuration is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum OutcomeRule {
    /// Outcome `j` with probability `|ψ_j|²|b^{(j)}|² / w`.
    #[default]
    BranchShare,
    /// Diagnostic: the sign of `Y` decides; `Y = 0` falls back to the branch share.
    SignOfY,
}

/// One sampled measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub z: i64,
    pub y: f64,
    pub outcome: Outcome,
    pub log_rate_plus: f64,
    pub log_rate_minus: f64,
    pub log_total_rate: f64,
    pub subensemble: Subensemble,
}

/// Conditional probabilities `(P(ε=+1), P(ε=−1))` of the next step given the running share `p`.
pub fn step_probabilities(p_plus: f64, kappa: f64) -> (f64, f64) {
    let bias = kappa * (2.0 * p_plus - 1.0);
    (0.5 * (1.0 + bias), 0.5 * (1.0 - bias))
}

/// The running state of a sequentially built physical configuration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PhysicalWalk {
    log_odds: f64,
    step_log_odds: f64,
    kappa: f64,
    z: i64,
}

impl PhysicalWalk {
    pub(crate) fn new(params: &ModelParams, psi: &QubitState) -> Self {
        let kappa = params.kappa();
        Self {
            log_odds: psi.log_weight(Outcome::Plus) - psi.log_weight(Outcome::Minus),
            step_log_odds: kappa.ln_1p() - (-kappa).ln_1p(),
            kappa,
            z: 0,
        }
    }

    /// Current `+` share `p_n`.
    pub(crate) fn p_plus(&self) -> f64 {
        logistic(self.log_odds)
    }

    pub(crate) fn z(&self) -> i64 {
        self.z
    }

    /// Draws `ε_{n+1}` from the physical conditional law and advances.
    pub(crate) fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> i8 {
        let (up, _) = step_probabilities(self.p_plus(), self.kappa);
        let s: i8 = if rng.random::<f64>() < up { 1 } else { -1 };
        self.advance(s);
        s
    }

    pub(crate) fn advance(&mut self, s: i8) {
        self.log_odds += s as f64 * self.step_log_odds;
        self.z += s as i64;
    }
}

/// Draws a configuration from the uniform ensemble: i.i.d. fair `±1` steps.
pub fn sample_uniform_config<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams) -> EpsilonConfig {
    let steps = (0..params.n_steps()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    EpsilonConfig::from_steps_unchecked(steps)
}

/// Draws a configuration with probability `2⁻ᴺ·w(ε)` (exact finite products).
pub fn sample_physical_config<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams, psi: &QubitState) -> EpsilonConfig {
    let mut walk = PhysicalWalk::new(params, psi);
    let steps = (0..params.n_steps()).map(|_| walk.step(rng)).collect();
    EpsilonConfig::from_steps_unchecked(steps)
}

fn physical_z<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams, psi: &QubitState) -> i64 {
    let mut walk = PhysicalWalk::new(params, psi);
    for _ in 0..params.n_steps() {
        walk.step(rng);
    }
    walk.z()
}

fn uniform_z<R: Rng + ?Sized>(rng: &mut R, n_steps: usize) -> i64 {
    // 64 fair coins per draw.
    let mut plus = 0u32;
    let mut left = n_steps;
    while left > 0 {
        let take = left.min(64);
        let bits: u64 = rng.random();
        let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
        plus += (bits & mask).count_ones();
        left -= take;
    }
    2 * plus as i64 - n_steps as i64
}

/// Draws a physical configuration, then an outcome, and classifies the result
/// with the default dead zone.
pub fn run_measurement<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams, psi: &QubitState) -> MeasurementRecord {
    Sampler::new(params.clone(), *psi).measure(rng)
}

/// Empirical frequency of the `+` outcome with a ±3σ band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BornEstimate {
    pub n_samples: u64,
    pub n_plus: u64,
    pub frequency_plus: f64,
    pub standard_error: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BornEstimate {
    pub fn from_counts(n_plus: u64, n_samples: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(ModelError::NoSamples);
        }
        let f = n_plus as f64 / n_samples as f64;
        let se = (f * (1.0 - f) / n_samples as f64).sqrt();
        Ok(Self {
            n_samples,
            n_plus,
            frequency_plus: f,
            standard_error: se,
            lower: (f - 3.0 * se).max(0.0),
            upper: (f + 3.0 * se).min(1.0),
        })
    }

    /// Whether `p` lies within `3·√(p(1−p)/n)` of the observed frequency.
    pub fn consistent_with(&self, p: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.n_samples as f64).sqrt();
        (self.frequency_plus - p).abs() <= 3.0 * sigma
    }
}

/// Fixed-bin histogram. Values outside the edges go to under/overflow and do
/// not count towards `total`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    underflow: u64,
    overflow: u64,
}

impl Histogram {
    /// `bins` equal-width bins over `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(ModelError::InvalidHistogram);
        }
        let width = hi - lo;
        let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 / bins as f64 }).collect();
        Self::from_edges(edges)
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|e| e[1] <= e[0]) {
            return Err(ModelError::InvalidHistogram);
        }
        let bins = edges.len() - 1;
        Ok(Self { edges, counts: vec![0; bins], total: 0, underflow: 0, overflow: 0 })
    }

    /// Bin holding `x`. Bins are half-open `[lo, hi)`; a value within `1e-9`
    /// of a mean bin width below an edge is placed above it, so lattice values
    /// that should sit exactly on an edge land consistently despite rounding.
    pub fn bin_index(&self, x: f64) -> Option<usize> {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap_or(&lo);
        let snapped = x + 1e-9 * (hi - lo) / self.counts.len() as f64;
        if snapped < lo || x >= hi || x.is_nan() {
            return None;
        }
        Some((self.edges.partition_point(|&e| e <= snapped) - 1).min(self.counts.len() - 1))
    }

    pub fn add(&mut self, x: f64) {
        match self.bin_index(x) {
            Some(i) => {
                self.counts[i] += 1;
                self.total += 1;
            }
            None if x < self.edges[0] => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    /// Adds the counts of `other`; the edges must match exactly.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(ModelError::HistogramMismatch);
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.total += other.total;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Observations inside the edges.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// All observations, including out-of-range ones.
    pub fn observations(&self) -> u64 {
        self.total + self.underflow + self.overflow
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_bounds(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Count divided by bin width and the number of observations, comparable to a probability density.
    pub fn densities(&self) -> Vec<f64> {
        let n = self.observations().max(1) as f64;
        (0..self.bin_count())
            .map(|i| {
                let (a, b) = self.bin_bounds(i);
                self.counts[i] as f64 / (n * (b - a))
            })
            .collect()
    }
}

/// Counts of records per subensemble.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SubensembleCounts {
    pub omega_plus: u64,
    pub omega_minus: u64,
    pub unclassified: u64,
}

impl SubensembleCounts {
    fn add(&mut self, s: Subensemble) {
        match s {
            Subensemble::OmegaPlus => self.omega_plus += 1,
            Subensemble::OmegaMinus => self.omega_minus += 1,
            Subensemble::Unclassified => self.unclassified += 1,
        }
    }

    fn merge(&mut self, other: &SubensembleCounts) {
        self.omega_plus += other.omega_plus;
        self.omega_minus += other.omega_minus;
        self.unclassified += other.unclassified;
    }

    pub fn total(&self) -> u64 {
        self.omega_plus + self.omega_minus + self.unclassified
    }

    pub fn unclassified_fraction(&self) -> f64 {
        self.unclassified as f64 / self.total().max(1) as f64
    }
}

/// Aggregates over a batch of physical measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalRunSummary {
    /// Y of every record.
    pub histogram: Histogram,
    /// Y of records that ended in `+`.
    pub plus_histogram: Histogram,
    /// Y of records that ended in `−`.
    pub minus_histogram: Histogram,
    pub subensembles: SubensembleCounts,
    /// Records whose outcome disagrees with the sign of `Y`.
    pub sign_disagreements: u64,
    pub n_plus: u64,
    pub n_samples: u64,
}

impl PhysicalRunSummary {
    fn empty(template: &Histogram) -> Self {
        Self {
            histogram: template.clone(),
            plus_histogram: template.clone(),
            minus_histogram: template.clone(),
            subensembles: SubensembleCounts::default(),
            sign_disagreements: 0,
            n_plus: 0,
            n_samples: 0,
        }
    }

    fn add(&mut self, r: &MeasurementRecord) {
        self.histogram.add(r.y);
        match r.outcome {
            Outcome::Plus => {
                self.plus_histogram.add(r.y);
                self.n_plus += 1;
            }
            Outcome::Minus => self.minus_histogram.add(r.y),
        }
        self.subensembles.add(r.subensemble);
        if (r.outcome == Outcome::Plus && r.y < 0.0) || (r.outcome == Outcome::Minus && r.y > 0.0) {
            self.sign_disagreements += 1;
        }
        self.n_samples += 1;
    }

    fn merge(&mut self, other: &PhysicalRunSummary) -> Result<()> {
        self.histogram.merge(&other.histogram)?;
        self.plus_histogram.merge(&other.plus_histogram)?;
        self.minus_histogram.merge(&other.minus_histogram)?;
        self.subensembles.merge(&other.subensembles);
        self.sign_disagreements += other.sign_disagreements;
        self.n_plus += other.n_plus;
        self.n_samples += other.n_samples;
        Ok(())
    }

    pub fn born(&self) -> Result<BornEstimate> {
        BornEstimate::from_counts(self.n_plus, self.n_samples)
    }
}

/// Batch driver for physical measurements under fixed model settings.
#[derive(Debug, Clone)]
pub struct Sampler {
    params: ModelParams,
    psi: QubitState,
    dead_zone: f64,
    rule: OutcomeRule,
}

impl Sampler {
    pub fn new(params: ModelParams, psi: QubitState) -> Self {
        Self { params, psi, dead_zone: DEFAULT_DEAD_ZONE, rule: OutcomeRule::BranchShare }
    }

    pub fn with_dead_zone(mut self, dead_zone: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dead_zone) {
            return Err(ModelError::InvalidDeadZone(dead_zone));
        }
        self.dead_zone = dead_zone;
        Ok(self)
    }

    pub fn with_outcome_rule(mut self, rule: OutcomeRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn psi(&self) -> &QubitState {
        &self.psi
    }

    /// One measurement drawn from `rng`.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementRecord {
        let z = physical_z(rng, &self.params, &self.psi);
        let n_plus = ((self.params.n_steps() as i64 + z) / 2) as usize;
        let rates = rates_from_count(n_plus, &self.params, &self.psi, RateMode::ExactProduct);
        let probs = rates.outcome_probabilities(&self.psi);
        let y = y_from_z(z, &self.params);
        let u: f64 = rng.random();
        let by_share = if u < probs.plus { Outcome::Plus } else { Outcome::Minus };
        let outcome = match self.rule {
            OutcomeRule::BranchShare => by_share,
            OutcomeRule::SignOfY if y > 0.0 => Outcome::Plus,
            OutcomeRule::SignOfY if y < 0.0 => Outcome::Minus,
            OutcomeRule::SignOfY => by_share,
        };
        MeasurementRecord {
            z,
            y,
            outcome,
            log_rate_plus: rates.log_rate_plus,
            log_rate_minus: rates.log_rate_minus,
            log_total_rate: rates.log_total_rate,
            subensemble: classify_y(y, self.dead_zone),
        }
    }

    /// Record `index` of the run seeded with `seed`.
    pub fn record(&self, seed: u64, index: u64) -> MeasurementRecord {
        self.measure(&mut substream(seed, StreamDomain::Physical, index))
    }

    /// Records `0..n` in index order.
    pub fn run_batch(&self, seed: u64, n: usize, workers: usize) -> Vec<MeasurementRecord> {
        with_workers(workers, || (0..n as u64).into_par_iter().map(|i| self.record(seed, i)).collect())
    }

    /// Aggregates `n` records into histograms over `template`'s bins without storing them.
    pub fn run_summary(&self, seed: u64, n: usize, workers: usize, template: &Histogram) -> Result<PhysicalRunSummary> {
        let empty = {
            let mut h = template.clone();
            h.counts.iter_mut().for_each(|c| *c = 0);
            h.total = 0;
            h.underflow = 0;
            h.overflow = 0;
            h
        };
        let partials: Vec<PhysicalRunSummary> = with_workers(workers, || {
            chunk_ranges(n)
                .into_par_iter()
                .map(|(start, end)| {
                    let mut part = PhysicalRunSummary::empty(&empty);
                    for i in start..end {
                        part.add(&self.record(seed, i as u64));
                    }
                    part
                })
                .collect()
        });
        let mut total = PhysicalRunSummary::empty(&empty);
        for p in &partials {
            total.merge(p)?;
        }
        Ok(total)
    }

    pub fn estimate_born(&self, seed: u64, n_samples: usize, workers: usize) -> Result<BornEstimate> {
        if n_samples == 0 {
            return Err(ModelError::NoSamples);
        }
        let counts: Vec<u64> = with_workers(workers, || {
            chunk_ranges(n_samples)
                .into_par_iter()
                .map(|(start, end)| {
                    (start..end).filter(|&i| self.record(seed, i as u64).outcome == Outcome::Plus).count() as u64
                })
                .collect()
        });
        BornEstimate::from_counts(counts.iter().sum(), n_samples as u64)
    }

    /// Y-histogram of `n` physical configurations (no outcome draw).
    pub fn physical_y_histogram(&self, seed: u64, n: usize, workers: usize, template: &Histogram) -> Result<Histogram> {
        Ok(self.run_summary(seed, n, workers, template)?.histogram)
    }
}

/// Born frequency of `n_samples` measurements seeded with `seed`.
pub fn estimate_born(
    seed: u64,
    params: &ModelParams,
    psi: &QubitState,
    n_samples: usize,
    workers: usize,
) -> Result<BornEstimate> {
    Sampler::new(params.clone(), *psi).estimate_born(seed, n_samples, workers)
}

/// Y-histogram of `n` configurations from the uniform ensemble.
pub fn uniform_y_histogram(
    seed: u64,
    params: &ModelParams,
    n: usize,
    workers: usize,
    template: &Histogram,
) -> Result<Histogram> {
    let n_steps = params.n_steps();
    let partials: Vec<Histogram> = with_workers(workers, || {
        chunk_ranges(n)
            .into_par_iter()
            .map(|(start, end)| {
                let mut h = Histogram::from_edges(template.edges.clone()).expect("template edges are valid");
                for i in start..end {
                    let z = uniform_z(&mut substream(seed, StreamDomain::Uniform, i as u64), n_steps);
                    h.add(y_from_z(z, params));
                }
                h
            })
            .collect()
    });
    let mut total = Histogram::from_edges(template.edges.clone())?;
    for p in &partials {
        total.merge(p)?;
    }
    Ok(total)
}

pub(crate) fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{outcome_probabilities, total_rate};
    use crate::numeric::log_add_exp;

    fn psi64() -> QubitState {
        QubitState::from_probability(0.6, 0.0).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_y(1.0, 0.5), Subensemble::OmegaPlus);
        assert_eq!(classify_y(-0.7, 0.5), Subensemble::OmegaMinus);
        assert_eq!(classify_y(0.0, 0.5), Subensemble::Unclassified);
        assert_eq!(classify_y(0.0, 0.0), Subensemble::Unclassified);
        assert_eq!(classify_y(0.2, 0.0), Subensemble::OmegaPlus);
        let rec = MeasurementRecord {
            z: 0,
            y: 0.0,
            outcome: Outcome::Plus,
            log_rate_plus: 0.0,
            log_rate_minus: 0.0,
            log_total_rate: 0.0,
            subensemble: Subensemble::Unclassified,
        };
        assert!(classify_subensemble(&rec, 1.0).is_err());
        assert_eq!(classify_subensemble(&rec, 0.25).unwrap(), Subensemble::Unclassified);
    }

    #[test]
    fn step_probabilities_match_partial_rate_ratio() {
        // P(s) = w_{n+1}(s) / (2 w_n) evaluated directly from the partial products.
        let params = ModelParams::new(0.2, 7).unwrap();
        let psi = psi64();
        let prefix = [1i8, 1, -1, 1, -1, -1, 1];
        let kappa = params.kappa();
        let mut walk = PhysicalWalk::new(&params, &psi);
        let (mut lp, mut lm) = (0.0_f64, 0.0_f64);
        for &s in &prefix {
            let log_w = log_add_exp(psi.log_weight(Outcome::Plus) + lp, psi.log_weight(Outcome::Minus) + lm);
            let next = |t: f64| {
                log_add_exp(
                    psi.log_weight(Outcome::Plus) + lp + (t * kappa).ln_1p(),
                    psi.log_weight(Outcome::Minus) + lm + (-t * kappa).ln_1p(),
                )
            };
            let direct_up = (next(1.0) - log_w).exp() / 2.0;
            let direct_down = (next(-1.0) - log_w).exp() / 2.0;
            let (up, down) = step_probabilities(walk.p_plus(), kappa);
            assert!((up - direct_up).abs() < 1e-14);
            assert!((down - direct_down).abs() < 1e-14);
            assert!((up + down - 1.0).abs() < 1e-15);
            walk.advance(s);
            lp += (s as f64 * kappa).ln_1p();
            lm += (-(s as f64) * kappa).ln_1p();
        }
    }

    #[test]
    fn single_branch_state_gives_iid_biased_steps() {
        let params = ModelParams::new(0.2, 1).unwrap();
        let psi = QubitState::basis(Outcome::Plus);
        let walk = PhysicalWalk::new(&params, &psi);
        let (up, _) = step_probabilities(walk.p_plus(), 0.2);
        assert_eq!(up, 0.6);
        let mut rng = substream(1, StreamDomain::Physical, 0);
        for _ in 0..100 {
            assert_eq!(run_measurement(&mut rng, &params, &psi).outcome, Outcome::Plus);
        }
    }

    #[test]
    fn record_fields_agree_with_model() {
        let params = ModelParams::new(0.1, 50).unwrap();
        let psi = psi64();
        let sampler = Sampler::new(params.clone(), psi);
        for i in 0..20 {
            let mut rng = substream(9, StreamDomain::Physical, i);
            let config = sample_physical_config(&mut rng, &params, &psi);
            let rec = sampler.record(9, i);
            assert_eq!(rec.z, crate::model::z_sum(&config));
            assert!((rec.y - crate::model::y_coordinate(&config, &params).unwrap()).abs() < 1e-15);
            let w = total_rate(&config, &params, &psi, RateMode::ExactProduct).unwrap();
            assert!((rec.log_total_rate - w).abs() < 1e-12);
            assert_eq!(rec.subensemble, classify_y(rec.y, DEFAULT_DEAD_ZONE));
            let _ = outcome_probabilities(&config, &params, &psi, RateMode::ExactProduct).unwrap();
        }
    }

    #[test]
    fn histogram_binning_and_merge() {
        let mut h = Histogram::uniform(-2.0, 2.0, 80).unwrap();
        h.add(-2.0);
        h.add(0.05);
        h.add(1.999);
        h.add(2.0);
        h.add(-3.0);
        assert_eq!(h.total(), 3);
        assert_eq!((h.underflow(), h.overflow()), (1, 1));
        assert_eq!(h.counts()[0], 1);
        assert_eq!(h.counts()[41], 1);
        assert_eq!(h.counts()[79], 1);
        let mut g = Histogram::uniform(-2.0, 2.0, 80).unwrap();
        g.merge(&h).unwrap();
        g.merge(&h).unwrap();
        assert_eq!(g.total(), 6);
        assert_eq!(g.counts().iter().sum::<u64>(), g.total());
        let other = Histogram::uniform(-1.0, 1.0, 80).unwrap();
        assert_eq!(g.merge(&other), Err(ModelError::HistogramMismatch));
        assert!(Histogram::uniform(1.0, 1.0, 3).is_err());
        assert!(Histogram::from_edges(vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn lattice_values_fill_bins_evenly() {
        // N = 2000, κ = 0.1: Y = Z/200 with even Z, a lattice of spacing 0.01 whose
        // points coincide with bin edges of width 0.05.
        let params = ModelParams::new(0.1, 2000).unwrap();
        let mut h = Histogram::uniform(-2.0, 2.0, 80).unwrap();
        for z in (-400..400).step_by(2) {
            h.add(y_from_z(z, &params));
        }
        assert!(h.counts().iter().all(|&c| c == 5), "{:?}", h.counts());
    }

    #[test]
    fn born_estimate_bounds() {
        let e = BornEstimate::from_counts(600, 1000).unwrap();
        assert!((e.standard_error - (0.24_f64 / 1000.0).sqrt()).abs() < 1e-15);
        assert!(e.lower < 0.6 && e.upper > 0.6);
        let all = BornEstimate::from_counts(10, 10).unwrap();
        assert_eq!((all.frequency_plus, all.standard_error, all.upper), (1.0, 0.0, 1.0));
        assert_eq!(BornEstimate::from_counts(0, 0), Err(ModelError::NoSamples));
    }

    #[test]
    fn born_single_branch_is_exact() {
        let params = ModelParams::new(0.1, 200).unwrap();
        let e = estimate_born(3, &params, &QubitState::basis(Outcome::Plus), 500, 2).unwrap();
        assert_eq!(e.frequency_plus, 1.0);
        let e = estimate_born(3, &params, &QubitState::basis(Outcome::Minus), 500, 2).unwrap();
        assert_eq!(e.frequency_plus, 0.0);
        assert!(estimate_born(3, &params, &psi64(), 0, 1).is_err());
    }

    #[test]
    fn batch_order_is_independent_of_workers() {
        let sampler = Sampler::new(ModelParams::new(0.1, 100).unwrap(), psi64());
        let a = sampler.run_batch(5, 300, 1);
        let b = sampler.run_batch(5, 300, 4);
        assert_eq!(a, b);
        assert_eq!(a[17], sampler.record(5, 17));
    }

    #[test]
    fn uniform_z_uses_exactly_n_coins() {
        let mut rng = substream(0, StreamDomain::Uniform, 0);
        for n in [1usize, 63, 64, 65, 200] {
            let z = uniform_z(&mut rng, n);
            assert!(z.unsigned_abs() as usize <= n);
            assert_eq!((z + n as i64) % 2, 0);
        }
    }

    #[test]
    fn chunking_covers_range() {
        assert!(chunk_ranges(0).is_empty());
        let c = chunk_ranges(10_000);
        assert_eq!(c.first(), Some(&(0, 4096)));
        assert_eq!(c.last(), Some(&(8192, 10_000)));
    }
}
