//! Experiment configuration: flat `key = value` files overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;

use super::CliError;
use crate::model::{ModelParams, QubitState};

pub const SEED_ENV: &str = "BORN_SIM_SEED";

pub const DEFAULT_KAPPA: f64 = 0.1;
pub const DEFAULT_XI: f64 = 20.0;
pub const DEFAULT_PSI_PLUS_SQ: f64 = 0.6;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BINS: usize = 80;
pub const DEFAULT_GRID_POINTS: usize = 401;
/// Y range of histograms and analytic curves.
pub const Y_RANGE: (f64, f64) = (-2.0, 2.0);
/// Step sizes above this leave the small-step regime; accepted with a warning.
pub const KAPPA_WARNING: f64 = 0.3;

/// Flags shared by every subcommand. Each one overrides the same key in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Step size κ, strictly inside (0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Number of apparatus steps N (exclusive with --xi).
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// Total variance Ξ = Nκ²; sets N = round(Ξ/κ²) (exclusive with --n-steps).
    #[arg(long, allow_negative_numbers = true)]
    pub xi: Option<f64>,
    /// Born weight |ψ₊|² in [0, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub psi_plus_sq: Option<f64>,
    /// Relative phase of ψ₋ with respect to ψ₊ (radians).
    #[arg(long, allow_negative_numbers = true)]
    pub psi_phase: Option<f64>,
    /// Total phase Φ, split evenly over the steps.
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Explicit comma-separated per-step phases (exclusive with --phi).
    #[arg(long, value_name = "LIST")]
    pub phases: Option<String>,
    /// Number of Monte Carlo records.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Master seed (falls back to $BORN_SIM_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Half-width of the unclassified band around Y = 0.
    #[arg(long, allow_negative_numbers = true)]
    pub dead_zone: Option<f64>,
    /// Histogram bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write full p_n paths for the first COUNT trajectories.
    #[arg(long, value_name = "COUNT")]
    pub export_paths: Option<usize>,
    /// Points of the analytic Y grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Steps(usize),
    Xi(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSpec {
    Total(f64),
    Explicit(Vec<f64>),
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kappa: f64,
    pub size: StepSize,
    pub psi_plus_sq: f64,
    pub psi_phase: f64,
    pub phases: PhaseSpec,
    pub samples: usize,
    pub seed: u64,
    pub dead_zone: f64,
    pub bins: usize,
    pub out: PathBuf,
    pub workers: usize,
    pub export_paths: usize,
    pub grid_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            size: StepSize::Xi(DEFAULT_XI),
            psi_plus_sq: DEFAULT_PSI_PLUS_SQ,
            psi_phase: 0.0,
            phases: PhaseSpec::Total(0.0),
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            dead_zone: crate::sampler::DEFAULT_DEAD_ZONE,
            bins: DEFAULT_BINS,
            out: PathBuf::from("."),
            workers: 0,
            export_paths: 0,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| config_error(format!("invalid value for {key}: {value:?}")))
}

fn parse_phase_list(value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num("phases", s)).collect()
}

/// Values read from a config file; `None` means "not set".
#[derive(Debug, Default)]
struct FileValues(Overrides);

fn parse_file(text: &str) -> Result<FileValues, CliError> {
    let mut v = Overrides::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| config_error(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "kappa" => v.kappa = Some(parse_num(&key, value)?),
            "n_steps" => v.n_steps = Some(parse_num(&key, value)?),
            "xi" => v.xi = Some(parse_num(&key, value)?),
            "psi_plus_sq" => v.psi_plus_sq = Some(parse_num(&key, value)?),
            "psi_phase" => v.psi_phase = Some(parse_num(&key, value)?),
            "phi" => v.phi = Some(parse_num(&key, value)?),
            "phases" => v.phases = Some(value.to_string()),
            "samples" => v.samples = Some(parse_num(&key, value)?),
            "seed" => v.seed = Some(parse_num(&key, value)?),
            "dead_zone" => v.dead_zone = Some(parse_num(&key, value)?),
            "bins" => v.bins = Some(parse_num(&key, value)?),
            "out" => v.out = Some(PathBuf::from(value)),
            "workers" => v.workers = Some(parse_num(&key, value)?),
            "export_paths" => v.export_paths = Some(parse_num(&key, value)?),
            "grid_points" => v.grid_points = Some(parse_num(&key, value)?),
            other => return Err(config_error(format!("line {}: unknown key {other:?}", lineno + 1))),
        }
    }
    Ok(FileValues(v))
}

fn read_file(path: &Path) -> Result<FileValues, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    parse_file(&text)
}

/// Resolves flags over an optional config file, then the seed environment variable, then defaults.
pub fn resolve(flags: &Overrides, env_seed: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let file = match &flags.config {
        Some(path) => read_file(path)?.0,
        None => Overrides::default(),
    };
    let d = ExperimentConfig::default();

    let size_in = |o: &Overrides| -> Result<Option<StepSize>, CliError> {
        match (o.n_steps, o.xi) {
            (Some(_), Some(_)) => Err(config_error("n_steps and xi are mutually exclusive")),
            (Some(n), None) => Ok(Some(StepSize::Steps(n))),
            (None, Some(x)) => Ok(Some(StepSize::Xi(x))),
            (None, None) => Ok(None),
        }
    };
    let phases_in = |o: &Overrides| -> Result<Option<PhaseSpec>, CliError> {
        match (o.phi, &o.phases) {
            (Some(_), Some(_)) => Err(config_error("phi and phases are mutually exclusive")),
            (Some(p), None) => Ok(Some(PhaseSpec::Total(p))),
            (None, Some(list)) => Ok(Some(PhaseSpec::Explicit(parse_phase_list(list)?))),
            (None, None) => Ok(None),
        }
    };

    let env_seed = match env_seed {
        Some(s) if !s.trim().is_empty() => Some(parse_num::<u64>(SEED_ENV, s)?),
        _ => None,
    };

    let cfg = ExperimentConfig {
        kappa: flags.kappa.or(file.kappa).unwrap_or(d.kappa),
        size: size_in(flags)?.or(size_in(&file)?).unwrap_or(d.size),
        psi_plus_sq: flags.psi_plus_sq.or(file.psi_plus_sq).unwrap_or(d.psi_plus_sq),
        psi_phase: flags.psi_phase.or(file.psi_phase).unwrap_or(d.psi_phase),
        phases: phases_in(flags)?.or(phases_in(&file)?).unwrap_or(d.phases),
        samples: flags.samples.or(file.samples).unwrap_or(d.samples),
        seed: flags.seed.or(file.seed).or(env_seed).unwrap_or(d.seed),
        dead_zone: flags.dead_zone.or(file.dead_zone).unwrap_or(d.dead_zone),
        bins: flags.bins.or(file.bins).unwrap_or(d.bins),
        out: flags.out.clone().or(file.out).unwrap_or(d.out),
        workers: flags.workers.or(file.workers).unwrap_or(d.workers),
        export_paths: flags.export_paths.or(file.export_paths).unwrap_or(d.export_paths),
        grid_points: flags.grid_points.or(file.grid_points).unwrap_or(d.grid_points),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(config_error(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if !(0.0..=1.0).contains(&self.psi_plus_sq) {
            return Err(config_error(format!("psi_plus_sq must lie in [0, 1], got {}", self.psi_plus_sq)));
        }
        if self.samples == 0 {
            return Err(config_error("samples must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dead_zone) {
            return Err(config_error(format!("dead_zone must lie in [0, 1), got {}", self.dead_zone)));
        }
        if self.bins == 0 {
            return Err(config_error("bins must be at least 1"));
        }
        if self.grid_points < 2 {
            return Err(config_error("grid_points must be at least 2"));
        }
        self.model_params()?;
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let params = match self.size {
            StepSize::Steps(n) => ModelParams::new(self.kappa, n),
            StepSize::Xi(xi) => ModelParams::from_xi(self.kappa, xi),
        }
        .map_err(|e| config_error(e.to_string()))?;
        match &self.phases {
            PhaseSpec::Total(phi) => Ok(params.with_total_phase(*phi)),
            PhaseSpec::Explicit(list) => ModelParams::with_phases(self.kappa, params.n_steps(), list.clone())
                .map_err(|e| config_error(e.to_string())),
        }
    }

    pub fn psi(&self) -> Result<QubitState, CliError> {
        QubitState::from_probability(self.psi_plus_sq, self.psi_phase).map_err(|e| config_error(e.to_string()))
    }

    pub fn kappa_warning(&self) -> Option<String> {
        (self.kappa > KAPPA_WARNING).then(|| {
            format!(
                "warning: kappa = {} exceeds {KAPPA_WARNING}; exact and asymptotic rates drift apart outside the small-step regime",
                self.kappa
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_figure_parameters() {
        let cfg = resolve(&Overrides::default(), None).unwrap();
        let p = cfg.model_params().unwrap();
        assert_eq!(p.n_steps(), 2000);
        assert_eq!(cfg.psi_plus_sq, 0.6);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn file_values_are_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "# test\nkappa = 0.2\nxi = 4\nseed = 9\npsi-plus-sq=0.3 # trailing\n").unwrap();
        let flags = Overrides { config: Some(path), n_steps: Some(12), ..Default::default() };
        let cfg = resolve(&flags, Some("77")).unwrap();
        assert_eq!(cfg.kappa, 0.2);
        assert_eq!(cfg.size, StepSize::Steps(12));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.psi_plus_sq, 0.3);
    }

    #[test]
    fn env_seed_is_a_fallback() {
        assert_eq!(resolve(&Overrides::default(), Some("77")).unwrap().seed, 77);
        let flags = Overrides { seed: Some(5), ..Default::default() };
        assert_eq!(resolve(&flags, Some("77")).unwrap().seed, 5);
        assert!(resolve(&Overrides::default(), Some("abc")).is_err());
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let both = Overrides { n_steps: Some(3), xi: Some(2.0), ..Default::default() };
        assert!(matches!(resolve(&both, None), Err(CliError::Config(_))));
        let bad_kappa = Overrides { kappa: Some(1.5), ..Default::default() };
        assert!(matches!(resolve(&bad_kappa, None), Err(CliError::Config(_))));
        let bad_psi = Overrides { psi_plus_sq: Some(-0.1), ..Default::default() };
        assert!(matches!(resolve(&bad_psi, None), Err(CliError::Config(_))));
        let no_samples = Overrides { samples: Some(0), ..Default::default() };
        assert!(matches!(resolve(&no_samples, None), Err(CliError::Config(_))));
        let phases = Overrides { n_steps: Some(3), phases: Some("0.1,0.2".into()), ..Default::default() };
        assert!(matches!(resolve(&phases, None), Err(CliError::Config(_))));
        assert!(matches!(parse_file("bogus = 1"), Err(CliError::Config(_))));
        assert!(matches!(parse_file("kappa 0.1"), Err(CliError::Config(_))));
    }

    #[test]
    fn explicit_phases_are_used() {
        let flags = Overrides { n_steps: Some(3), phases: Some("0.1, 0.2,0.3".into()), ..Default::default() };
        let p = resolve(&flags, None).unwrap().model_params().unwrap();
        assert_eq!(p.phases(), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn large_kappa_warns() {
        let flags = Overrides { kappa: Some(0.5), n_steps: Some(10), ..Default::default() };
        assert!(resolve(&flags, None).unwrap().kappa_warning().is_some());
        assert!(resolve(&Overrides::default(), None).unwrap().kappa_warning().is_none());
    }
}
