use bornsim::analytic::{q_density, quadrature_window, separation_diagnostics};
use bornsim::model::{ModelParams, Outcome, QubitState};
use bornsim::numeric::trapezoid;
use bornsim::rng::{substream, StreamDomain};
use bornsim::sampler::{
    estimate_born, sample_physical_config, sample_uniform_config, uniform_y_histogram, Histogram, Sampler,
};
use bornsim::y_coordinate;

const SEED: u64 = 9_001;

fn figure_params() -> ModelParams {
    ModelParams::from_xi(0.1, 20.0).unwrap()
}

/// Number of bins whose count is more than 4σ (Poisson) from `n·mass(bin)`.
fn bins_off(h: &Histogram, n: f64, mass: impl Fn(f64, f64) -> f64) -> usize {
    (0..h.bin_count())
        .filter(|&i| {
            let (a, b) = h.bin_bounds(i);
            let expected = n * mass(a, b);
            (h.counts()[i] as f64 - expected).abs() > 4.0 * expected.max(1.0).sqrt()
        })
        .count()
}

/// Gaussian mass of the continuum interval a bin's lattice points stand for.
/// `Y` lives on a lattice of spacing `2/(Nκ)`; a bin `[a, b)` collects the
/// lattice points in it, which represent `[a − 1/(Nκ), b − 1/(Nκ))`.
fn gaussian_mass(params: &ModelParams, centre: f64) -> impl Fn(f64, f64) -> f64 {
    let xi = params.xi();
    let half_spacing = 1.0 / (params.n_steps() as f64 * params.kappa());
    let (_, _, step) = quadrature_window(xi);
    move |a, b| trapezoid(|y| q_density(y - centre, xi).unwrap(), a - half_spacing, b - half_spacing, step, 1e-12)
}

#[test]
fn uniform_steps_are_unbiased_and_uncorrelated() {
    let params = ModelParams::new(0.1, 40).unwrap();
    let n = 40_000;
    let mut sums = vec![0i64; 40];
    let mut lag_one = 0i64;
    for i in 0..n {
        let c = sample_uniform_config(&mut substream(SEED, StreamDomain::Uniform, i), &params);
        for (k, &s) in c.steps().iter().enumerate() {
            sums[k] += s as i64;
        }
        lag_one += c.steps().windows(2).map(|w| (w[0] * w[1]) as i64).sum::<i64>();
    }
    let bound = 4.5 / (n as f64).sqrt();
    for (k, s) in sums.iter().enumerate() {
        assert!((*s as f64 / n as f64).abs() < bound, "step {k}: mean {}", *s as f64 / n as f64);
    }
    let corr = lag_one as f64 / (39.0 * n as f64);
    assert!(corr.abs() < bound / 39f64.sqrt() * 1.5, "lag-one correlation {corr}");
}

#[test]
fn uniform_y_has_width_one_over_root_xi() {
    let params = figure_params();
    let n = 20_000;
    let mean_sq: f64 = (0..n)
        .map(|i| {
            let c = sample_uniform_config(&mut substream(SEED, StreamDomain::Uniform, i), &params);
            y_coordinate(&c, &params).unwrap().powi(2)
        })
        .sum::<f64>()
        / n as f64;
    // Var(Y²) = 2/Ξ² for a Gaussian of variance 1/Ξ.
    let se = (2.0_f64).sqrt() * 0.05 / (n as f64).sqrt();
    assert!((mean_sq - 0.05).abs() < 4.0 * se, "⟨Y²⟩ = {mean_sq}");
}

#[test]
fn uniform_histogram_follows_q() {
    let params = figure_params();
    let n = 100_000;
    let template = Histogram::uniform(-2.0, 2.0, 80).unwrap();
    let h = uniform_y_histogram(SEED, &params, n, 0, &template).unwrap();
    assert_eq!(h.total(), n as u64);
    assert_eq!(bins_off(&h, n as f64, gaussian_mass(&params, 0.0)), 0);
}

#[test]
fn physical_mean_y_is_the_population_difference() {
    let params = figure_params();
    let psi = QubitState::from_probability(0.6, 0.0).unwrap();
    let n = 20_000;
    let ys: Vec<f64> = (0..n)
        .map(|i| {
            let c = sample_physical_config(&mut substream(SEED, StreamDomain::Physical, i), &params, &psi);
            y_coordinate(&c, &params).unwrap()
        })
        .collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 0.2).abs() < 4.0 * (var / n as f64).sqrt(), "⟨Y⟩ = {mean}");
}

#[test]
fn single_branch_first_step_bias() {
    let params = ModelParams::new(0.2, 5).unwrap();
    let psi = QubitState::basis(Outcome::Plus);
    let n = 100_000;
    let ups = (0..n)
        .filter(|&i| {
            sample_physical_config(&mut substream(SEED, StreamDomain::Physical, i), &params, &psi).steps()[0] == 1
        })
        .count();
    let f = ups as f64 / n as f64;
    let p = 0.6;
    assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "P(ε₁=+1) = {f}");
}

#[test]
fn outcome_conditioned_histograms_are_shifted_gaussians() {
    let params = figure_params();
    let psi = QubitState::from_probability(0.6, 0.0).unwrap();
    let template = Histogram::uniform(-2.0, 2.0, 80).unwrap();
    let run = Sampler::new(params.clone(), psi).run_summary(SEED, 100_000, 0, &template).unwrap();
    let n_plus = run.n_plus as f64;
    let n_minus = (run.n_samples - run.n_plus) as f64;
    assert_eq!(bins_off(&run.plus_histogram, n_plus, gaussian_mass(&params, 1.0)), 0);
    assert_eq!(bins_off(&run.minus_histogram, n_minus, gaussian_mass(&params, -1.0)), 0);
}

#[test]
fn unclassified_fraction_matches_the_analytic_mass() {
    let psi = QubitState::from_probability(0.6, 0.0).unwrap();
    let template = Histogram::uniform(-2.0, 2.0, 80).unwrap();
    for xi in [20.0, 80.0] {
        let params = ModelParams::from_xi(0.1, xi).unwrap();
        let n = 50_000;
        let run = Sampler::new(params, psi).run_summary(SEED, n, 0, &template).unwrap();
        let expected = separation_diagnostics(xi, &psi, 0.5).unwrap();
        let f = run.subensembles.unclassified_fraction();
        let se = (expected.unclassified_mass * (1.0 - expected.unclassified_mass) / n as f64).sqrt();
        assert!((f - expected.unclassified_mass).abs() < 4.0 * se + 1.0 / n as f64, "Ξ={xi}: {f} vs {expected:?}");
        assert!(f <= expected.tail_bound);
        if xi >= 80.0 {
            assert!(f < 1e-3);
        }
    }
}

#[test]
fn balanced_born_frequency() {
    let psi = QubitState::from_probability(0.5, 0.0).unwrap();
    let e = estimate_born(SEED, &figure_params(), &psi, 50_000, 0).unwrap();
    assert!(e.consistent_with(0.5), "{e:?}");
}

#[test]
fn summaries_do_not_depend_on_worker_count() {
    let params = ModelParams::from_xi(0.1, 5.0).unwrap();
    let psi = QubitState::from_probability(0.3, 0.2).unwrap();
    let template = Histogram::uniform(-2.0, 2.0, 40).unwrap();
    let sampler = Sampler::new(params, psi);
    let one = sampler.run_summary(SEED, 10_000, 1, &template).unwrap();
    let many = sampler.run_summary(SEED, 10_000, 6, &template).unwrap();
    assert_eq!(one, many);
    assert_eq!(sampler.run_batch(SEED, 5_000, 1), sampler.run_batch(SEED, 5_000, 3));
}
