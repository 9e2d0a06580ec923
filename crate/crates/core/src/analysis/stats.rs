//! Small statistics helpers: regression with confidence intervals and
//! standard errors of sample moments.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Least-squares line `y = intercept + slope x` with a 95% interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Sum of squared residuals.
    pub residual: f64,
}

impl LineFit {
    pub fn interval_intersects(&self, lo: f64, hi: f64) -> bool {
        self.ci_low <= hi && self.ci_high >= lo
    }
}

/// Needs at least 3 points for an interval.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let (slope_stderr, half) = if x.len() > 2 {
        let dof = n - 2.0;
        let se = (residual / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.975);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    LineFit { slope, intercept, slope_stderr, ci_low: slope - half, ci_high: slope + half, residual }
}

/// Fit of `log y` against `log x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> LineFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Sample variance (unbiased) and its standard error, the plug-in estimate
/// of `sqrt(mu4 / M - sigma^4 (M - 3) / (M (M - 1)))` from the central
/// moments `m2` and `m4`. Using the biased `m2` alongside `m4` keeps the
/// estimate nonnegative and consistent when `mu4` is close to `sigma^4`.
pub fn variance_with_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / m;
    let se2 = (m4 - m2 * m2 * (m - 3.0) / (m - 1.0)) / m;
    (m2 * m / (m - 1.0), se2.max(0.0).sqrt())
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y);
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!(f.ci_high - f.ci_low < 1e-10);
    }

    #[test]
    fn interval_uses_student_t() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.1, 1.9, 3.2];
        let f = fit_line(&x, &y);
        // independent evaluation: dof = 2, t_{0.975} = 4.302653
        let mx = 1.5;
        let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let se = (f.residual / 2.0 / sxx).sqrt();
        assert!(((f.ci_high - f.slope) - 4.302653 * se).abs() < 1e-5);
        assert!(f.interval_intersects(1.0, 1.05));
    }

    #[test]
    fn variance_stderr_of_symmetric_two_point_law() {
        // mu_4 = sigma^4 here, so the exact stderr is sigma^2 sqrt(2 / (M (M - 1)))
        let v: Vec<f64> = (0..10_000).map(|i| (i % 2) as f64).collect();
        let (var, se) = variance_with_stderr(&v);
        let m: f64 = 10_000.0;
        assert!((var - 0.25 * m / (m - 1.0)).abs() < 1e-15);
        let oracle = 0.25 * (2.0 / (m * (m - 1.0))).sqrt();
        assert!((se - oracle).abs() / oracle < 1e-9, "{se} {oracle}");
    }

    #[test]
    fn variance_stderr_of_three_point_law() {
        // values 0, 1, 2 with equal mass: sigma^2 = 2/3, mu_4 = 2/3, so
        // se^2 -> (mu_4 - sigma^4) / M = (2/9) / M
        let v: Vec<f64> = (0..9_999).map(|i| (i % 3) as f64).collect();
        let (var, se) = variance_with_stderr(&v);
        assert!((var - 2.0 / 3.0).abs() < 1e-4);
        let m: f64 = 9_999.0;
        let oracle = (2.0 / 9.0 / m).sqrt();
        assert!((se - oracle).abs() / oracle < 1e-3, "{se} {oracle}");
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
    }
}
