//! Rate-weighted measurement model.
//!
//! A two-level system is measured by an apparatus fragment whose initial
//! micro-state is a string of `N` unbiased `±1` steps. Each step nudges the
//! two transition amplitudes in opposite directions, so the total transition
//! rate depends strongly on the configuration. Weighting configurations by
//! their rate splits the ensemble into two well separated groups that end in
//! `+` or `−` with probabilities `|ψ₊|²` and `|ψ₋|²`.
//!
//! - [`model`]: per-configuration amplitudes, rates and outcome probabilities.
//! - [`analytic`]: continuum distributions `q(Y)`, `Q(Y)` and density matrices.
//! - [`sampler`]: Monte Carlo over the uniform and rate-weighted ensembles.
//! - [`trajectory`]: the outcome probability as a martingale under stepwise extension.
//! - [`oracle`]: exhaustive enumeration for small `N`.
//! - [`cli`]: the `born-sim` command-line tool.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod trajectory;

pub use error::{ModelError, Result};
pub use model::{
    branch_amplitude, branch_rate, branch_rates, outcome_probabilities, total_rate, y_coordinate, z_sum,
    ApparatusStateLabel, BranchRates, EpsilonConfig, LogAmplitude, ModelParams, Outcome, OutcomeProbabilities,
    QubitState, RateMode, Register,
};
