//! Small numerical helpers shared by the model layers: log-domain sums,
//! compensated accumulation and trapezoid quadrature.

/// `ln(e^a + e^b)` without overflow. Either argument may be `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Logistic function `1 / (1 + e^-x)`, stable for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Natural log that maps zero to `-inf` instead of propagating a NaN for tiny negatives.
pub(crate) fn ln_weight(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Composite trapezoid rule on `[a, b]`, refined by interval halving.
///
/// Starts from the coarsest uniform grid whose spacing does not exceed
/// `max_step`, then halves the spacing (reusing previous nodes) until two
/// successive estimates agree to `rel_tol` relative to the larger of 1 and
/// the integral magnitude, or the refinement cap is reached.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, max_step: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    const MAX_REFINEMENTS: usize = 12;
    let mut n = ((b - a) / max_step).ceil().max(1.0) as usize;
    let mut h = (b - a) / n as f64;
    let mut interior = CompensatedSum::new();
    for i in 1..n {
        interior.add(f(a + i as f64 * h));
    }
    let ends = 0.5 * (f(a) + f(b));
    let mut estimate = h * (ends + interior.value());
    for _ in 0..MAX_REFINEMENTS {
        // New nodes sit at the midpoints of the current grid.
        for i in 0..n {
            interior.add(f(a + (i as f64 + 0.5) * h));
        }
        n *= 2;
        h *= 0.5;
        let refined = h * (ends + interior.value());
        let converged = (refined - estimate).abs() <= rel_tol * refined.abs().max(1.0);
        estimate = refined;
        if converged {
            break;
        }
    }
    estimate
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect()
        }
    }
}
