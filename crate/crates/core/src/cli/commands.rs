//! Subcommand bodies. Each returns the list of files it wrote.

use std::path::PathBuf;

use serde::Serialize;

use super::config::{ExperimentConfig, Y_RANGE};
use super::output::{fmt_f64, histogram_csv, Csv, OutputDir};
use super::CliError;
use crate::analytic::{
    final_density, mean_final_density_matrix, mean_off_diagonal_closed_form, peak_summary, q_density,
    quadrature_window, rate_function, separation_diagnostics, DensityMatrix2, PeakSummary, SeparationReport,
};
use crate::error::ModelError;
use crate::model::{ModelParams, QubitState};
use crate::numeric::{trapezoid, uniform_grid};
use crate::oracle::{
    compare_sampler, enumerate_all_with_workers, DivergenceReport, EmpiricalDistribution, InvariantCheck,
};
use crate::sampler::{uniform_y_histogram, BornEstimate, Histogram, Sampler, SubensembleCounts};
use crate::trajectory::{martingale_residual, max_martingale_residual, run_trajectories, trajectory_record};

/// Tolerance on the exact enumeration identities.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

fn model_err(e: ModelError) -> CliError {
    match e {
        ModelError::Capacity { .. } => CliError::Capacity(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

#[derive(Debug, Serialize)]
struct RunParams {
    kappa: f64,
    n_steps: usize,
    xi: f64,
    total_phase: f64,
    psi_plus_sq: f64,
    psi_phase: f64,
}

impl RunParams {
    fn new(cfg: &ExperimentConfig, params: &ModelParams) -> Self {
        Self {
            kappa: params.kappa(),
            n_steps: params.n_steps(),
            xi: params.xi(),
            total_phase: params.total_phase(),
            psi_plus_sq: cfg.psi_plus_sq,
            psi_phase: cfg.psi_phase,
        }
    }
}

fn setup(cfg: &ExperimentConfig) -> Result<(ModelParams, QubitState, OutputDir), CliError> {
    let params = cfg.model_params()?;
    let psi = cfg.psi()?;
    let out = OutputDir::create(&cfg.out)?;
    Ok((params, psi, out))
}

fn y_histogram(cfg: &ExperimentConfig) -> Result<Histogram, CliError> {
    Histogram::uniform(Y_RANGE.0, Y_RANGE.1, cfg.bins).map_err(model_err)
}

#[derive(Debug, Serialize)]
struct ComplexValue {
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize)]
struct AnalyticSummary {
    params: RunParams,
    /// ∫Q(Y)dY by quadrature.
    final_normalization: f64,
    mean_density_matrix: DensityMatrix2,
    mean_off_diagonal_closed_form: ComplexValue,
    peaks: PeakSummary,
    separation: SeparationReport,
}

/// `analytic_curves.csv` (y,q,w,Q) and `analytic_summary.json`.
pub fn cmd_analytic(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (params, psi, mut out) = setup(cfg)?;
    let xi = params.xi();
    let phi = params.total_phase();
    let mut csv = Csv::new(&["y", "q", "w", "Q"]);
    for y in uniform_grid(Y_RANGE.0, Y_RANGE.1, cfg.grid_points) {
        csv.row(&[
            fmt_f64(y),
            fmt_f64(q_density(y, xi).map_err(model_err)?),
            fmt_f64(rate_function(y, xi, &psi).map_err(model_err)?.exp()),
            fmt_f64(final_density(y, xi, &psi).map_err(model_err)?),
        ]);
    }
    out.write_text("analytic_curves.csv", &csv.into_string())?;

    let (lo, hi, step) = quadrature_window(xi);
    let off = mean_off_diagonal_closed_form(xi, phi, &psi);
    let summary = AnalyticSummary {
        params: RunParams::new(cfg, &params),
        final_normalization: trapezoid(|y| final_density(y, xi, &psi).unwrap_or(0.0), lo, hi, step, 1e-14),
        mean_density_matrix: mean_final_density_matrix(xi, phi, &psi).map_err(model_err)?,
        mean_off_diagonal_closed_form: ComplexValue { re: off.re, im: off.im },
        peaks: peak_summary(xi, phi, &psi).map_err(model_err)?,
        separation: separation_diagnostics(xi, &psi, cfg.dead_zone).map_err(model_err)?,
    };
    out.write_json("analytic_summary.json", &summary)?;
    Ok(out.written().to_vec())
}

#[derive(Debug, Serialize)]
struct SampleSummary {
    params: RunParams,
    seed: u64,
    dead_zone: f64,
    born: BornEstimate,
    subensembles: SubensembleCounts,
    unclassified_fraction: f64,
    /// Outcomes opposite to the sign of Y.
    sign_disagreements: u64,
}

/// `hist_uniform.csv`, `hist_physical.csv` and `born_estimate.json`.
pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (params, psi, mut out) = setup(cfg)?;
    let template = y_histogram(cfg)?;
    let uniform = uniform_y_histogram(cfg.seed, &params, cfg.samples, cfg.workers, &template).map_err(model_err)?;
    let sampler = Sampler::new(params.clone(), psi).with_dead_zone(cfg.dead_zone).map_err(model_err)?;
    let run = sampler.run_summary(cfg.seed, cfg.samples, cfg.workers, &template).map_err(model_err)?;
    out.write_text("hist_uniform.csv", &histogram_csv(&uniform))?;
    out.write_text("hist_physical.csv", &histogram_csv(&run.histogram))?;
    let summary = SampleSummary {
        params: RunParams::new(cfg, &params),
        seed: cfg.seed,
        dead_zone: cfg.dead_zone,
        born: run.born().map_err(model_err)?,
        subensembles: run.subensembles,
        unclassified_fraction: run.subensembles.unclassified_fraction(),
        sign_disagreements: run.sign_disagreements,
    };
    out.write_json("born_estimate.json", &summary)?;
    Ok(out.written().to_vec())
}

#[derive(Debug, Serialize)]
struct TrajectoryReport {
    params: RunParams,
    seed: u64,
    n_trajectories: u64,
    initial_p: f64,
    mean_final_p: f64,
    standard_error: f64,
    fraction_plus: f64,
    fraction_minus: f64,
    fraction_undecided: f64,
    /// |E[p_{n+1}|p_n] − p_n| at the configured κ, worst over p ∈ [0, 1].
    max_martingale_residual: f64,
    /// Same, over the sweep κ ∈ (0, 0.95].
    max_martingale_residual_sweep: f64,
}

/// `terminal_p_hist.csv`, `trajectory_summary.json` and optionally `trajectory_paths.csv`.
pub fn cmd_trajectory(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (params, psi, mut out) = setup(cfg)?;
    let summary = run_trajectories(cfg.seed, &params, &psi, cfg.samples, cfg.workers, cfg.bins).map_err(model_err)?;
    let at_kappa = (0..=1000).map(|i| martingale_residual(i as f64 / 1000.0, params.kappa()).abs()).fold(0.0, f64::max);
    out.write_text("terminal_p_hist.csv", &histogram_csv(&summary.terminal_histogram))?;
    let report = TrajectoryReport {
        params: RunParams::new(cfg, &params),
        seed: cfg.seed,
        n_trajectories: summary.n_trajectories,
        initial_p: summary.initial_p,
        mean_final_p: summary.mean_final_p,
        standard_error: summary.standard_error,
        fraction_plus: summary.fraction_plus,
        fraction_minus: summary.fraction_minus,
        fraction_undecided: summary.fraction_undecided,
        max_martingale_residual: at_kappa,
        max_martingale_residual_sweep: max_martingale_residual(201, 95, 0.95),
    };
    out.write_json("trajectory_summary.json", &report)?;
    if cfg.export_paths > 0 {
        let mut csv = Csv::new(&["trajectory", "step", "p"]);
        for i in 0..cfg.export_paths.min(cfg.samples) {
            let t = trajectory_record(cfg.seed, i as u64, &params, &psi, true);
            for (step, p) in t.path.unwrap_or_default().iter().enumerate() {
                csv.row(&[i.to_string(), step.to_string(), fmt_f64(*p)]);
            }
        }
        out.write_text("trajectory_paths.csv", &csv.into_string())?;
    }
    Ok(out.written().to_vec())
}

#[derive(Debug, Serialize)]
struct OracleComparison {
    seed: u64,
    invariants: InvariantCheck,
    divergence: DivergenceReport,
}

/// `oracle_report.json` and `oracle_comparison.json`; exit code 4 if an exact identity fails.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let params = cfg.model_params()?;
    let psi = cfg.psi()?;
    let report = enumerate_all_with_workers(&params, &psi, cfg.workers).map_err(model_err)?;
    let mut out = OutputDir::create(&cfg.out)?;
    let empirical =
        EmpiricalDistribution::sample_physical(&params, &psi, cfg.seed, cfg.samples, cfg.workers).map_err(model_err)?;
    let divergence = compare_sampler(&report, &empirical).map_err(model_err)?;
    let invariants = report.check_invariants(ORACLE_TOLERANCE);
    out.write_json("oracle_report.json", &report)?;
    out.write_json("oracle_comparison.json", &OracleComparison { seed: cfg.seed, invariants, divergence })?;
    if !invariants.passed {
        return Err(CliError::Invariant(format!(
            "enumeration identities exceed tolerance {ORACLE_TOLERANCE}: {invariants:?}"
        )));
    }
    Ok(out.written().to_vec())
}

/// `figure2a.csv` (y,q,empirical_density) and `figure2b.csv` (y,Q,empirical_density), one row per bin centre.
pub fn cmd_figure2(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let (params, psi, mut out) = setup(cfg)?;
    let xi = params.xi();
    let template = y_histogram(cfg)?;
    let uniform = uniform_y_histogram(cfg.seed, &params, cfg.samples, cfg.workers, &template).map_err(model_err)?;
    let physical = Sampler::new(params.clone(), psi)
        .physical_y_histogram(cfg.seed, cfg.samples, cfg.workers, &template)
        .map_err(model_err)?;

    let panel = |h: &Histogram, column: &str, f: &dyn Fn(f64) -> f64| {
        let mut csv = Csv::new(&["y", column, "empirical_density"]);
        for (i, d) in h.densities().into_iter().enumerate() {
            let y = h.bin_center(i);
            csv.row(&[fmt_f64(y), fmt_f64(f(y)), fmt_f64(d)]);
        }
        csv.into_string()
    };
    let q = |y: f64| q_density(y, xi).unwrap_or(f64::NAN);
    let big_q = |y: f64| final_density(y, xi, &psi).unwrap_or(f64::NAN);
    out.write_text("figure2a.csv", &panel(&uniform, "q", &q))?;
    out.write_text("figure2b.csv", &panel(&physical, "Q", &big_q))?;
    Ok(out.written().to_vec())
}
