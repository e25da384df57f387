use crate::error::{Error, Result};

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Index of the coordinate with the largest relative error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `f` around `point`.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(point: &[f64], analytic: &[f64], eps: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if point.len() != analytic.len() {
        return Err(Error::shape("grad_check", point.len(), analytic.len()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x)?;
        x[i] = orig - eps;
        let minus = f(&x)?;
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        if !numeric.is_finite() || !a.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient at coordinate {i}: analytic {a}, numeric {numeric}"
            )));
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic = a;
            report.numeric = numeric;
        }
        report.checked += 1;
    }
    Ok(report)
}
