//! Central finite-difference gradient checks.

/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`
/// so entries that are zero up to round-off do not divide by ~0.
pub const FLOOR: f64 = 1e-4;
pub const STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Index of the entry with the largest relative error.
    pub worst: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares `analytic` with central differences of `f` around `x`.
pub fn check(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> GradReport {
    assert_eq!(x.len(), analytic.len(), "gradient length");
    let mut p = x.to_vec();
    let mut report = GradReport {
        checked: x.len(),
        max_rel_err: 0.0,
        worst: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for i in 0..x.len() {
        p[i] = x[i] + STEP;
        let up = f(&p);
        p[i] = x[i] - STEP;
        let down = f(&p);
        p[i] = x[i];
        let numeric = (up - down) / (2.0 * STEP);
        let e = rel_err(analytic[i], numeric);
        if e > report.max_rel_err || i == 0 {
            report.max_rel_err = e;
            report.worst = i;
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_a_cubic() {
        let x = [0.5, -1.5, 2.0];
        let grad: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        let r = check(&x, &grad, |p| p.iter().map(|v| v * v * v).sum());
        assert!(r.max_rel_err < 1e-8, "{r:?}");
        let wrong = [grad[0], grad[1] * 1.01, grad[2]];
        assert_eq!(check(&x, &wrong, |p| p.iter().map(|v| v * v * v).sum()).worst, 1);
    }
}
