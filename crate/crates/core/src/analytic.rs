//! Closed-form continuum layer in the aggregate coordinate `Y`.
//!
//! Initial configurations are distributed as the Gaussian `q(Y)` with
//! variance `1/Ξ`. Weighting by the transition rate `w(Y)` yields the final
//! distribution `Q(Y) = q(Y)w(Y)`, which is exactly a two-Gaussian mixture
//! centred on `Y = ±1` with Born weights.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ModelError, Result};
use crate::model::{Outcome, QubitState};
use crate::numeric::{log_add_exp, trapezoid};

/// Relative convergence target of the refining trapezoid rule.
const QUADRATURE_TOL: f64 = 1e-14;

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidXi(xi))
    }
}

fn check_dead_zone(dead_zone: f64) -> Result<()> {
    if (0.0..1.0).contains(&dead_zone) {
        Ok(())
    } else {
        Err(ModelError::InvalidDeadZone(dead_zone))
    }
}

fn log_q(y: f64, xi: f64) -> f64 {
    0.5 * (xi / (2.0 * PI)).ln() - 0.5 * xi * y * y
}

/// Gaussian initial density `q(Y) = √(Ξ/2π)·e^{−ΞY²/2}`.
pub fn q_density(y: f64, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok(log_q(y, xi).exp())
}

/// `ln w(Y)` with `w(Y) = |ψ₊|²e^{Ξ(Y−½)} + |ψ₋|²e^{Ξ(−Y−½)}`.
pub fn rate_function(y: f64, xi: f64, psi: &QubitState) -> Result<f64> {
    check_xi(xi)?;
    Ok(log_rate(y, xi, psi))
}

fn log_rate(y: f64, xi: f64, psi: &QubitState) -> f64 {
    log_add_exp(psi.log_weight(Outcome::Plus) + xi * (y - 0.5), psi.log_weight(Outcome::Minus) + xi * (-y - 0.5))
}

/// Final distribution `Q(Y) = |ψ₊|²q(Y−1) + |ψ₋|²q(Y+1)`.
pub fn final_density(y: f64, xi: f64, psi: &QubitState) -> Result<f64> {
    check_xi(xi)?;
    Ok(final_density_unchecked(y, xi, psi))
}

fn final_density_unchecked(y: f64, xi: f64, psi: &QubitState) -> f64 {
    psi.weight(Outcome::Plus) * log_q(y - 1.0, xi).exp() + psi.weight(Outcome::Minus) * log_q(y + 1.0, xi).exp()
}

/// `Q(Y)` evaluated as the product `q(Y)·w(Y)` (combined in the log domain).
pub fn final_density_product_form(y: f64, xi: f64, psi: &QubitState) -> Result<f64> {
    check_xi(xi)?;
    Ok((log_q(y, xi) + log_rate(y, xi, psi)).exp())
}

/// 2×2 density matrix in the basis `{|+⟩⊗|β₊;+⟩, |−⟩⊗|β₋;−⟩}`.
///
/// Hermiticity holds by construction: only `ρ₊₊`, `ρ₋₋` and `ρ₊₋` are stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2 {
    rho_pp: f64,
    rho_mm: f64,
    rho_pm: Complex64,
}

impl DensityMatrix2 {
    /// Validated constructor: unit trace within `1e-12` and positive semidefinite.
    pub fn new(rho_pp: f64, rho_mm: f64, rho_pm: Complex64) -> Result<Self> {
        let m = Self { rho_pp, rho_mm, rho_pm };
        if !m.is_valid(1e-12) {
            return Err(ModelError::ParamMismatch(format!(
                "not a density matrix: diag=({rho_pp}, {rho_mm}), off-diagonal={rho_pm}"
            )));
        }
        Ok(m)
    }

    pub(crate) fn from_entries(rho_pp: f64, rho_mm: f64, rho_pm: Complex64) -> Self {
        Self { rho_pp, rho_mm, rho_pm }
    }

    /// Projector onto `|ψ⟩`.
    pub fn pure(psi: &QubitState) -> Self {
        Self {
            rho_pp: psi.weight(Outcome::Plus),
            rho_mm: psi.weight(Outcome::Minus),
            rho_pm: psi.psi_plus() * psi.psi_minus().conj(),
        }
    }

    pub fn rho_pp(&self) -> f64 {
        self.rho_pp
    }

    pub fn rho_mm(&self) -> f64 {
        self.rho_mm
    }

    pub fn rho_pm(&self) -> Complex64 {
        self.rho_pm
    }

    pub fn rho_mp(&self) -> Complex64 {
        self.rho_pm.conj()
    }

    /// Entries as `[[ρ₊₊, ρ₊₋], [ρ₋₊, ρ₋₋]]`.
    pub fn entries(&self) -> [[Complex64; 2]; 2] {
        [[Complex64::new(self.rho_pp, 0.0), self.rho_pm], [self.rho_mp(), Complex64::new(self.rho_mm, 0.0)]]
    }

    pub fn trace(&self) -> f64 {
        self.rho_pp + self.rho_mm
    }

    pub fn determinant(&self) -> f64 {
        self.rho_pp * self.rho_mm - self.rho_pm.norm_sqr()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.rho_pp * self.rho_pp + self.rho_mm * self.rho_mm + 2.0 * self.rho_pm.norm_sqr()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        (self.trace() - 1.0).abs() <= tol && self.rho_pp >= -tol && self.rho_mm >= -tol && self.determinant() >= -tol
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix2) -> f64 {
        (self.rho_pp - other.rho_pp)
            .abs()
            .max((self.rho_mm - other.rho_mm).abs())
            .max((self.rho_pm - other.rho_pm).norm())
    }
}

impl Serialize for DensityMatrix2 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("DensityMatrix2", 4)?;
        s.serialize_field("rho_pp", &self.rho_pp)?;
        s.serialize_field("rho_mm", &self.rho_mm)?;
        s.serialize_field("rho_pm_re", &self.rho_pm.re)?;
        s.serialize_field("rho_pm_im", &self.rho_pm.im)?;
        s.end()
    }
}

/// Final-state density matrix `ρ(Y, Φ)` for a configuration with aggregate `y`.
///
/// With `a = ln|ψ₊|² + ΞY`, `b = ln|ψ₋|² − ΞY` and `m = ln(e^a + e^b)`, the
/// diagonal is `(e^{a−m}, e^{b−m})` and `|ρ₊₋| = e^{(a+b)/2 − m}`, so nothing
/// is exponentiated before normalization.
pub fn density_matrix(y: f64, phi: f64, xi: f64, psi: &QubitState) -> Result<DensityMatrix2> {
    check_xi(xi)?;
    Ok(density_matrix_unchecked(y, phi, xi, psi))
}

fn density_matrix_unchecked(y: f64, phi: f64, xi: f64, psi: &QubitState) -> DensityMatrix2 {
    let a = psi.log_weight(Outcome::Plus) + xi * y;
    let b = psi.log_weight(Outcome::Minus) - xi * y;
    let m = log_add_exp(a, b);
    let rho_pp = (a - m).exp();
    let rho_mm = (b - m).exp();
    let off_magnitude = if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY { 0.0 } else { (0.5 * (a + b) - m).exp() };
    let phase = psi.psi_plus().arg() - psi.psi_minus().arg() + phi;
    DensityMatrix2::from_entries(rho_pp, rho_mm, Complex64::from_polar(off_magnitude, phase))
}

/// Large-`Ξ` limit of `ρ(±1, Φ)`: the projector onto the registered outcome.
pub fn limit_density_matrix(outcome: Outcome) -> DensityMatrix2 {
    match outcome {
        Outcome::Plus => DensityMatrix2::from_entries(1.0, 0.0, Complex64::new(0.0, 0.0)),
        Outcome::Minus => DensityMatrix2::from_entries(0.0, 1.0, Complex64::new(0.0, 0.0)),
    }
}

/// Integration window `[−1 − 8/√Ξ, 1 + 8/√Ξ]` and maximum trapezoid step `1/(20√Ξ)`.
pub fn quadrature_window(xi: f64) -> (f64, f64, f64) {
    let width = 1.0 / xi.sqrt();
    (-1.0 - 8.0 * width, 1.0 + 8.0 * width, width / 20.0)
}

/// Ensemble mean `∫dY Q(Y)ρ(Y,Φ)` by quadrature.
///
/// The diagonal tends to `(|ψ₊|², |ψ₋|²)`; at finite `Ξ` the off-diagonal
/// keeps the value `ψ₊ψ₋*e^{iΦ}e^{−Ξ/2}`.
pub fn mean_final_density_matrix(xi: f64, phi: f64, psi: &QubitState) -> Result<DensityMatrix2> {
    check_xi(xi)?;
    let (lo, hi, step) = quadrature_window(xi);
    let weighted = |y: f64| {
        let q = final_density_unchecked(y, xi, psi);
        (q, density_matrix_unchecked(y, phi, xi, psi))
    };
    let rho_pp = trapezoid(
        |y| {
            let (q, r) = weighted(y);
            q * r.rho_pp
        },
        lo,
        hi,
        step,
        QUADRATURE_TOL,
    );
    let rho_mm = trapezoid(
        |y| {
            let (q, r) = weighted(y);
            q * r.rho_mm
        },
        lo,
        hi,
        step,
        QUADRATURE_TOL,
    );
    let re = trapezoid(
        |y| {
            let (q, r) = weighted(y);
            q * r.rho_pm.re
        },
        lo,
        hi,
        step,
        QUADRATURE_TOL,
    );
    let im = trapezoid(
        |y| {
            let (q, r) = weighted(y);
            q * r.rho_pm.im
        },
        lo,
        hi,
        step,
        QUADRATURE_TOL,
    );
    Ok(DensityMatrix2::from_entries(rho_pp, rho_mm, Complex64::new(re, im)))
}

/// Closed form of the mean off-diagonal element at finite `Ξ`.
pub fn mean_off_diagonal_closed_form(xi: f64, phi: f64, psi: &QubitState) -> Complex64 {
    psi.psi_plus() * psi.psi_minus().conj() * Complex64::from_polar((-0.5 * xi).exp(), phi)
}

/// How cleanly `Q(Y)` splits into two peripheral peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationReport {
    pub xi: f64,
    pub dead_zone: f64,
    /// `∫_{|Y|<dead_zone} Q(Y) dY`.
    pub unclassified_mass: f64,
    /// Mass of the `+` peak lying at `Y < 0`.
    pub plus_cross_mass: f64,
    /// Mass of the `−` peak lying at `Y > 0`.
    pub minus_cross_mass: f64,
    /// Gaussian tail bound `e^{−Ξ(1−dead_zone)²/2}` on the unclassified mass.
    pub tail_bound: f64,
}

pub fn separation_diagnostics(xi: f64, psi: &QubitState, dead_zone: f64) -> Result<SeparationReport> {
    check_xi(xi)?;
    check_dead_zone(dead_zone)?;
    let (lo, hi, step) = quadrature_window(xi);
    let unclassified_mass =
        trapezoid(|y| final_density_unchecked(y, xi, psi), -dead_zone, dead_zone, step, QUADRATURE_TOL);
    let w_plus = psi.weight(Outcome::Plus);
    let w_minus = psi.weight(Outcome::Minus);
    let plus_cross_mass = w_plus * trapezoid(|y| log_q(y - 1.0, xi).exp(), lo, 0.0, step, QUADRATURE_TOL);
    let minus_cross_mass = w_minus * trapezoid(|y| log_q(y + 1.0, xi).exp(), 0.0, hi, step, QUADRATURE_TOL);
    Ok(SeparationReport {
        xi,
        dead_zone,
        unclassified_mass,
        plus_cross_mass,
        minus_cross_mass,
        tail_bound: (-0.5 * xi * (1.0 - dead_zone).powi(2)).exp(),
    })
}

/// Mass routed to each outcome, `∫Q(Y)ρ_jj(Y)dY`, with the location of each peak of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakSummary {
    pub plus_location: f64,
    pub minus_location: f64,
    pub plus_mass: f64,
    pub minus_mass: f64,
}

impl PeakSummary {
    pub fn mass_ratio(&self) -> f64 {
        self.plus_mass / self.minus_mass
    }
}

pub fn peak_summary(xi: f64, phi: f64, psi: &QubitState) -> Result<PeakSummary> {
    let mean = mean_final_density_matrix(xi, phi, psi)?;
    let width = 1.0 / xi.sqrt();
    let q = |y: f64| final_density_unchecked(y, xi, psi);
    Ok(PeakSummary {
        plus_location: golden_max(q, 1.0 - 3.0 * width, 1.0 + 3.0 * width),
        minus_location: golden_max(q, -1.0 - 3.0 * width, -1.0 + 3.0 * width),
        plus_mass: mean.rho_pp,
        minus_mass: mean.rho_mm,
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// A density tabulated on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub xi: f64,
}

impl DistributionCurve {
    /// `q(Y)` on `grid`.
    pub fn initial(xi: f64, grid: &[f64]) -> Result<Self> {
        check_xi(xi)?;
        Ok(Self { grid: grid.to_vec(), values: grid.iter().map(|&y| log_q(y, xi).exp()).collect(), xi })
    }

    /// `Q(Y)` on `grid`.
    pub fn final_state(xi: f64, psi: &QubitState, grid: &[f64]) -> Result<Self> {
        check_xi(xi)?;
        Ok(Self {
            grid: grid.to_vec(),
            values: grid.iter().map(|&y| final_density_unchecked(y, xi, psi)).collect(),
            xi,
        })
    }

    /// Trapezoid integral over the tabulated points.
    pub fn integral(&self) -> f64 {
        self.grid.windows(2).zip(self.values.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum()
    }

    /// Indices of strict interior local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        (1..self.values.len().saturating_sub(1))
            .filter(|&i| self.values[i] > self.values[i - 1] && self.values[i] >= self.values[i + 1])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi64() -> QubitState {
        QubitState::from_probability(0.6, 0.0).unwrap()
    }

    #[test]
    fn q_density_examples() {
        assert!((q_density(0.0, 2.0 * PI).unwrap() - 1.0).abs() < 1e-15);
        for y in [0.1, 0.7, 2.5] {
            assert_eq!(q_density(y, 20.0).unwrap(), q_density(-y, 20.0).unwrap());
        }
        let v = trapezoid(|y| q_density(y, 20.0).unwrap(), -3.0, 3.0, 1e-3, 1e-15);
        assert!((v - 1.0).abs() < 1e-9);
        assert_eq!(q_density(0.0, 0.0), Err(ModelError::InvalidXi(0.0)));
        assert!(q_density(0.0, -1.0).is_err());
    }

    #[test]
    fn rate_function_examples() {
        let w0 = rate_function(0.0, 20.0, &psi64()).unwrap();
        assert!((w0 - (-10.0)).abs() < 1e-14);
        let w = rate_function(0.5, 7.0, &QubitState::basis(Outcome::Plus)).unwrap();
        assert!(w.abs() < 1e-15);
        let (lo, hi, step) = quadrature_window(20.0);
        let mean_w = trapezoid(
            |y| q_density(y, 20.0).unwrap() * rate_function(y, 20.0, &psi64()).unwrap().exp(),
            lo - 1.0,
            hi + 1.0,
            step,
            1e-15,
        );
        assert!((mean_w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn final_density_examples() {
        let xi = 20.0;
        let expected = 0.6 * (xi / (2.0 * PI)).sqrt() + 0.4 * q_density(2.0, xi).unwrap();
        assert!((final_density(1.0, xi, &psi64()).unwrap() - expected).abs() < 1e-14);
        let up = QubitState::basis(Outcome::Plus);
        for y in [-1.0, 0.3, 1.0, 1.4] {
            assert_eq!(final_density(y, xi, &up).unwrap(), q_density(y - 1.0, xi).unwrap());
        }
    }

    #[test]
    fn density_matrix_at_origin_is_the_input_state() {
        let psi = QubitState::from_probability(0.3, 0.8).unwrap();
        let rho = density_matrix(0.0, 0.0, 20.0, &psi).unwrap();
        assert!(rho.max_abs_diff(&DensityMatrix2::pure(&psi)) < 1e-15);
    }

    #[test]
    fn density_matrix_at_plus_peak() {
        let rho = density_matrix(1.0, 0.0, 20.0, &psi64()).unwrap();
        let tiny = (0.4 / 0.6) * (-40.0_f64).exp();
        assert!((1.0 - rho.rho_pp()).abs() < 1e-15);
        assert!((rho.rho_mm() - tiny).abs() < 1e-12 * tiny);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_survives_extreme_aggregates() {
        let rho = density_matrix(-1e4, 1.0, 100.0, &psi64()).unwrap();
        assert!(rho.is_valid(1e-12));
        assert_eq!(rho.rho_mm(), 1.0);
        assert!(rho.rho_pm().norm() < 1e-300);
    }

    #[test]
    fn limit_matrices() {
        let plus = limit_density_matrix(Outcome::Plus);
        let minus = limit_density_matrix(Outcome::Minus);
        assert_eq!((plus.rho_pp(), plus.rho_mm()), (1.0, 0.0));
        assert_eq!((minus.rho_pp(), minus.rho_mm()), (0.0, 1.0));
        let rho = density_matrix(1.0, 0.4, 100.0, &psi64()).unwrap();
        assert!(rho.rho_pm().norm() < 1e-20);
        assert!(rho.max_abs_diff(&plus) < 1e-20);
    }

    #[test]
    fn mean_matrix_single_branch() {
        let m = mean_final_density_matrix(20.0, 0.3, &QubitState::basis(Outcome::Plus)).unwrap();
        assert!((m.rho_pp() - 1.0).abs() < 1e-12);
        assert_eq!(m.rho_mm(), 0.0);
        assert_eq!(m.rho_pm().norm(), 0.0);
    }

    #[test]
    fn validated_constructor_rejects_bad_matrices() {
        assert!(DensityMatrix2::new(0.5, 0.4, Complex64::new(0.0, 0.0)).is_err());
        assert!(DensityMatrix2::new(0.5, 0.5, Complex64::new(0.6, 0.0)).is_err());
        assert!(DensityMatrix2::new(0.5, 0.5, Complex64::new(0.5, 0.0)).is_ok());
    }

    #[test]
    fn separation_single_branch_has_no_minus_crossing() {
        let r = separation_diagnostics(20.0, &QubitState::basis(Outcome::Plus), 0.5).unwrap();
        assert_eq!(r.minus_cross_mass, 0.0);
        assert!(separation_diagnostics(20.0, &psi64(), 1.0).is_err());
    }

    #[test]
    fn separation_shrinks_with_xi() {
        let a = separation_diagnostics(20.0, &psi64(), 0.5).unwrap();
        let b = separation_diagnostics(200.0, &psi64(), 0.5).unwrap();
        assert!(a.unclassified_mass <= a.tail_bound);
        assert!(b.unclassified_mass < 1e-9 && b.unclassified_mass < a.unclassified_mass);
    }

    #[test]
    fn curves_integrate_to_one() {
        let grid = crate::numeric::uniform_grid(-3.0, 3.0, 6001);
        let q = DistributionCurve::initial(20.0, &grid).unwrap();
        let big_q = DistributionCurve::final_state(20.0, &psi64(), &grid).unwrap();
        assert!((q.integral() - 1.0).abs() < 1e-9);
        assert!((big_q.integral() - 1.0).abs() < 1e-9);
        assert_eq!(q.local_maxima(), vec![3000]);
        let peaks: Vec<f64> = big_q.local_maxima().iter().map(|&i| grid[i]).collect();
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0] + 1.0).abs() < 1e-3 && (peaks[1] - 1.0).abs() < 1e-3);
    }
}
