//! Central finite-difference gradient oracle.

use super::real::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    pub max_rel_error: f64,
    /// Coordinate attaining the maximum (0 when there are no parameters).
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

const DENOM_FLOOR: f64 = 1e-8;

/// Compares `analytic` against central differences of `loss` at `params`.
///
/// The loss may be evaluated in a wider [`Real`] type; the difference of the
/// two probes is taken in that type and divided by the exact spacing of the
/// probe points.
pub fn finite_diff_check<R, F>(mut loss: F, params: &[f64], analytic: &[f64], step: f64) -> Result<GradCheckReport>
where
    R: Real,
    F: FnMut(&[f64]) -> Result<R>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::shape("finite_diff_check", params.len(), analytic.len()));
    }
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        worst_analytic: analytic.first().copied().unwrap_or(0.0),
        worst_numeric: 0.0,
    };
    for i in 0..params.len() {
        let (hi, lo) = (params[i] + step, params[i] - step);
        probe[i] = hi;
        let plus = loss(&probe)?;
        probe[i] = lo;
        let minus = loss(&probe)?;
        probe[i] = params[i];
        if !plus.to_f64().is_finite() || !minus.to_f64().is_finite() {
            return Err(Error::numeric(format!("loss at probe of coordinate {i}")));
        }
        let numeric = (plus - minus).to_f64() / (hi - lo);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        let err = (a - numeric).abs() / denom;
        if err > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: err,
                worst_index: i,
                worst_analytic: a,
                worst_numeric: numeric,
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let theta = [0.5, -1.25, 3.0, 0.75];
        let r = finite_diff_check(|p| Ok(0.5 * p.iter().map(|v| v * v).sum::<f64>()), &theta, &theta, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let r = finite_diff_check(|_| Ok(4.0f64), &[1.0, 2.0], &[0.0, 0.0], 1e-6).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let r = finite_diff_check(|p| Ok(p[0] * p[0]), &[1.0], &[-2.0], 1e-6).unwrap();
        assert!(r.max_rel_error > 1.0);
        assert_eq!(r.worst_index, 0);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let r = finite_diff_check(|p| Ok(if p[0] > 1.0 { f64::NAN } else { 0.0f64 }), &[1.0], &[0.0], 1e-6);
        assert!(matches!(r, Err(Error::Numeric { .. })));
        assert!(finite_diff_check(|_| Ok(0.0f64), &[1.0], &[0.0], 0.0).is_err());
    }
}
