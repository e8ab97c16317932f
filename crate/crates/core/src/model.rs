//! Configuration-level quantities of the measurement model.
//!
//! An apparatus fragment is described by a sequence of `N` unbiased steps
//! `ε_n = ±1`. Each step rescales the two branch amplitudes by factors close
//! to one, favouring the `+` branch when `ε_n = +1` and the `-` branch when
//! `ε_n = -1`. Everything here is a pure function of the configuration, the
//! model parameters and the measured qubit state.
//!
//! Rates are kept in the log domain throughout: at large `N` the branch rates
//! span `e^{±Nκ}`, well outside the range of an `f64`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::numeric::{ln_weight, log_add_exp, logistic};

const NORM_TOLERANCE: f64 = 1e-12;

/// Measurement outcome `j = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    /// `+1.0` for `Plus`, `-1.0` for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Normalized superposition `ψ₊|+⟩ + ψ₋|−⟩` of the measured qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitState {
    psi_plus: Complex64,
    psi_minus: Complex64,
}

impl QubitState {
    pub fn new(psi_plus: Complex64, psi_minus: Complex64) -> Result<Self> {
        let norm = psi_plus.norm_sqr() + psi_minus.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(ModelError::NotNormalized(norm));
        }
        Ok(Self { psi_plus, psi_minus })
    }

    /// State with `|ψ₊|² = p_plus`, `ψ₊` real nonnegative and `ψ₋ = √(1-p_plus)·e^{i·relative_phase}`.
    pub fn from_probability(p_plus: f64, relative_phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_plus) {
            return Err(ModelError::InvalidProbability(p_plus));
        }
        let plus = Complex64::new(p_plus.sqrt(), 0.0);
        let minus = Complex64::from_polar((1.0 - p_plus).sqrt(), relative_phase);
        Self::new(plus, minus)
    }

    /// The eigenstate `|j⟩`.
    pub fn basis(outcome: Outcome) -> Self {
        let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        match outcome {
            Outcome::Plus => Self { psi_plus: one, psi_minus: zero },
            Outcome::Minus => Self { psi_plus: zero, psi_minus: one },
        }
    }

    pub fn psi_plus(&self) -> Complex64 {
        self.psi_plus
    }

    pub fn psi_minus(&self) -> Complex64 {
        self.psi_minus
    }

    pub fn amplitude(&self, outcome: Outcome) -> Complex64 {
        match outcome {
            Outcome::Plus => self.psi_plus,
            Outcome::Minus => self.psi_minus,
        }
    }

    /// Born weight `|ψ_j|²`.
    pub fn weight(&self, outcome: Outcome) -> f64 {
        self.amplitude(outcome).norm_sqr()
    }

    /// `ln|ψ_j|²`, `-inf` for a vanishing amplitude.
    pub fn log_weight(&self, outcome: Outcome) -> f64 {
        ln_weight(self.weight(outcome))
    }
}

/// Step size, step count and per-step phases of the apparatus model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    kappa: f64,
    n_steps: usize,
    phases: Vec<f64>,
}

impl ModelParams {
    /// Parameters with all phases zero.
    pub fn new(kappa: f64, n_steps: usize) -> Result<Self> {
        Self::with_phases(kappa, n_steps, vec![0.0; n_steps])
    }

    pub fn with_phases(kappa: f64, n_steps: usize, phases: Vec<f64>) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(ModelError::InvalidKappa(kappa));
        }
        if n_steps == 0 {
            return Err(ModelError::ZeroSteps);
        }
        if phases.len() != n_steps {
            return Err(ModelError::PhaseCount { expected: n_steps, actual: phases.len() });
        }
        Ok(Self { kappa, n_steps, phases })
    }

    /// Picks `N = round(xi / κ²)`; the realized variance is reported by [`ModelParams::xi`].
    pub fn from_xi(kappa: f64, xi: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(ModelError::InvalidKappa(kappa));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(ModelError::InvalidXi(xi));
        }
        let n = (xi / (kappa * kappa)).round();
        if n < 1.0 {
            return Err(ModelError::ZeroSteps);
        }
        Self::new(kappa, n as usize)
    }

    /// Replaces the phases by `total / N` on every step.
    pub fn with_total_phase(mut self, total: f64) -> Self {
        let each = total / self.n_steps as f64;
        self.phases.iter_mut().for_each(|p| *p = each);
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Total variance `Ξ = N·κ²`.
    pub fn xi(&self) -> f64 {
        self.n_steps as f64 * self.kappa * self.kappa
    }

    /// `Φ = Σ φ_n`.
    pub fn total_phase(&self) -> f64 {
        self.phases.iter().sum()
    }

    pub(crate) fn check_config(&self, config: &EpsilonConfig) -> Result<()> {
        if config.len() != self.n_steps {
            return Err(ModelError::LengthMismatch { expected: self.n_steps, actual: config.len() });
        }
        Ok(())
    }
}

/// One apparatus initial state: a sequence of `±1` steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EpsilonConfig {
    steps: Vec<i8>,
}

impl EpsilonConfig {
    pub fn new(steps: Vec<i8>) -> Result<Self> {
        if let Some((index, &value)) = steps.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(ModelError::InvalidStep { index, value });
        }
        Ok(Self { steps })
    }

    pub(crate) fn from_steps_unchecked(steps: Vec<i8>) -> Self {
        debug_assert!(steps.iter().all(|&s| s == 1 || s == -1));
        Self { steps }
    }

    pub fn uniform(n_steps: usize, step: Outcome) -> Self {
        let s = if step == Outcome::Plus { 1 } else { -1 };
        Self { steps: vec![s; n_steps] }
    }

    /// Bit `n` of `mask` set means `ε_{n+1} = +1`. Only the low `n_steps` bits are read.
    pub fn from_bits(mask: u64, n_steps: usize) -> Self {
        assert!(n_steps <= 64, "bit encoding holds at most 64 steps");
        let steps = (0..n_steps).map(|n| if mask >> n & 1 == 1 { 1 } else { -1 }).collect();
        Self { steps }
    }

    /// Inverse of [`EpsilonConfig::from_bits`]; `None` past 64 steps.
    pub fn to_bits(&self) -> Option<u64> {
        if self.steps.len() > 64 {
            return None;
        }
        Some(self.steps.iter().enumerate().filter(|(_, &s)| s == 1).fold(0u64, |m, (n, _)| m | 1 << n))
    }

    pub fn steps(&self) -> &[i8] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn count_plus(&self) -> usize {
        self.steps.iter().filter(|&&s| s == 1).count()
    }
}

/// Register slot of the apparatus: ready, or having begun to register `±`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Register {
    Ready,
    RegisteredPlus,
    RegisteredMinus,
}

/// Symbolic apparatus state `|ε;0⟩` or one of its daughters `|β_±(ε);±⟩`.
/// Carries no internal structure beyond the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApparatusStateLabel {
    pub register: Register,
    pub config: EpsilonConfig,
}

impl ApparatusStateLabel {
    pub fn ready(config: EpsilonConfig) -> Self {
        Self { register: Register::Ready, config }
    }

    /// Daughter state reached when the transition ends in `outcome`.
    pub fn registered(&self, outcome: Outcome) -> Self {
        let register = match outcome {
            Outcome::Plus => Register::RegisteredPlus,
            Outcome::Minus => Register::RegisteredMinus,
        };
        Self { register, config: self.config.clone() }
    }
}

/// How products over steps are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RateMode {
    /// Finite product over the `N` step factors.
    #[default]
    ExactProduct,
    /// Exponential large-`N`, small-`κ` closed form in `Z`, `Ξ`.
    Asymptotic,
}

/// A complex number held as `exp(log_magnitude + i·phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogAmplitude {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl LogAmplitude {
    pub fn log_norm_sqr(&self) -> f64 {
        2.0 * self.log_magnitude
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }
}

/// Log-domain branch rates `ln|b^{(±)}|²`, their phases and the total rate `ln w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchRates {
    pub log_rate_plus: f64,
    pub log_rate_minus: f64,
    pub phase_plus: f64,
    pub phase_minus: f64,
    pub log_total_rate: f64,
}

/// Net step count `Z = Σ ε_n`.
pub fn z_sum(config: &EpsilonConfig) -> i64 {
    config.steps.iter().map(|&s| s as i64).sum()
}

/// Normalized aggregate `Y = Z / (Nκ)`.
pub fn y_coordinate(config: &EpsilonConfig, params: &ModelParams) -> Result<f64> {
    params.check_config(config)?;
    Ok(y_from_z(z_sum(config), params))
}

pub(crate) fn y_from_z(z: i64, params: &ModelParams) -> f64 {
    z as f64 / (params.n_steps as f64 * params.kappa)
}

/// Branch amplitude `b^{(j)}(ε)` in log-magnitude/phase form.
///
/// `ExactProduct` multiplies the per-step factors `(1 + ½jε_nκ − ⅛κ²)·e^{½ijφ_n}`;
/// `Asymptotic` returns `exp(½Ξ(jY − ½) + ½ijΦ)`. The squared modulus of the
/// exact per-step factor is `1 + jεκ` only up to `O(κ³)`; [`branch_rate`]
/// uses the rate factor `1 + jεκ` directly.
pub fn branch_amplitude(
    config: &EpsilonConfig,
    params: &ModelParams,
    j: Outcome,
    mode: RateMode,
) -> Result<LogAmplitude> {
    params.check_config(config)?;
    let sign = j.sign();
    let kappa = params.kappa;
    let phase = 0.5 * sign * params.total_phase();
    let log_magnitude = match mode {
        RateMode::ExactProduct => {
            let n_plus = config.count_plus() as f64;
            let n_minus = (config.len() - config.count_plus()) as f64;
            let up = (0.5 * sign * kappa - 0.125 * kappa * kappa).ln_1p();
            let down = (-0.5 * sign * kappa - 0.125 * kappa * kappa).ln_1p();
            n_plus * up + n_minus * down
        }
        RateMode::Asymptotic => {
            let y = y_from_z(z_sum(config), params);
            0.5 * params.xi() * (sign * y - 0.5)
        }
    };
    Ok(LogAmplitude { log_magnitude, phase })
}

/// `ln|b^{(j)}(ε)|²`: `Σ ln(1 + jε_nκ)` or, asymptotically, `jZκ − ½Ξ`.
pub fn branch_rate(config: &EpsilonConfig, params: &ModelParams, j: Outcome, mode: RateMode) -> Result<f64> {
    params.check_config(config)?;
    Ok(log_branch_rate(config.count_plus(), params, j, mode))
}

/// Branch rate from the number of `+1` steps; the rate depends on `ε` only through it.
pub(crate) fn log_branch_rate(n_plus: usize, params: &ModelParams, j: Outcome, mode: RateMode) -> f64 {
    let n = params.n_steps;
    let kappa = params.kappa;
    let sign = j.sign();
    match mode {
        RateMode::ExactProduct => {
            let n_minus = (n - n_plus) as f64;
            n_plus as f64 * (sign * kappa).ln_1p() + n_minus * (-sign * kappa).ln_1p()
        }
        RateMode::Asymptotic => {
            let z = 2.0 * n_plus as f64 - n as f64;
            sign * z * kappa - 0.5 * params.xi()
        }
    }
}

/// Both branch rates, their phases and the total rate for one configuration.
pub fn branch_rates(
    config: &EpsilonConfig,
    params: &ModelParams,
    psi: &QubitState,
    mode: RateMode,
) -> Result<BranchRates> {
    params.check_config(config)?;
    Ok(rates_from_count(config.count_plus(), params, psi, mode))
}

pub(crate) fn rates_from_count(n_plus: usize, params: &ModelParams, psi: &QubitState, mode: RateMode) -> BranchRates {
    let log_rate_plus = log_branch_rate(n_plus, params, Outcome::Plus, mode);
    let log_rate_minus = log_branch_rate(n_plus, params, Outcome::Minus, mode);
    let phi = params.total_phase();
    BranchRates {
        log_rate_plus,
        log_rate_minus,
        phase_plus: 0.5 * phi,
        phase_minus: -0.5 * phi,
        log_total_rate: log_add_exp(
            psi.log_weight(Outcome::Plus) + log_rate_plus,
            psi.log_weight(Outcome::Minus) + log_rate_minus,
        ),
    }
}

/// `ln w` with `w = |ψ₊|²|b⁽⁺⁾|² + |ψ₋|²|b⁽⁻⁾|²`.
pub fn total_rate(config: &EpsilonConfig, params: &ModelParams, psi: &QubitState, mode: RateMode) -> Result<f64> {
    Ok(branch_rates(config, params, psi, mode)?.log_total_rate)
}

/// Outcome probabilities `p_j = |ψ_j|²|b^{(j)}|² / w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeProbabilities {
    pub plus: f64,
    pub minus: f64,
}

impl OutcomeProbabilities {
    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Plus => self.plus,
            Outcome::Minus => self.minus,
        }
    }
}

impl BranchRates {
    /// Branch shares of the total rate for the state `psi`.
    pub fn outcome_probabilities(&self, psi: &QubitState) -> OutcomeProbabilities {
        let a = psi.log_weight(Outcome::Plus) + self.log_rate_plus;
        let b = psi.log_weight(Outcome::Minus) + self.log_rate_minus;
        let (plus, minus) = if a == f64::NEG_INFINITY {
            (0.0, 1.0)
        } else if b == f64::NEG_INFINITY {
            (1.0, 0.0)
        } else {
            (logistic(a - b), logistic(b - a))
        };
        OutcomeProbabilities { plus, minus }
    }
}

pub fn outcome_probabilities(
    config: &EpsilonConfig,
    params: &ModelParams,
    psi: &QubitState,
    mode: RateMode,
) -> Result<OutcomeProbabilities> {
    Ok(branch_rates(config, params, psi, mode)?.outcome_probabilities(psi))
}
