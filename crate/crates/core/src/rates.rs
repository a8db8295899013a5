//! Predicted convergence exponents and log–log fits of measured errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::truncation::rate_denominator;

/// Parameters that fix the theoretical exponents of a rate experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub mu: f64,
    pub s: f64,
    pub p: Exponent,
    pub r: usize,
}

/// Smallest admissible smoothness, `2r − 1/s − 2/q + 3/2`.
pub fn smoothness_threshold(s: f64, q: Exponent, r: usize) -> f64 {
    2.0 * r as f64 - 1.0 / s - 2.0 * q.reciprocal() + 1.5
}

/// Exponent `θ` in `‖f^{(r)} − D_N^{(r)} f^δ‖_q = O(δ^θ)`:
///
/// ```text
/// θ = (μ − 2r + 1/s + 2/q − 3/2) / (μ − 1/p + 1/s)
/// ```
///
/// Rejects parameters for which the smoothness hypothesis `μ > 2r − 1/s − 2/q + 3/2`
/// fails.
pub fn theoretical_exponent(mu: f64, s: f64, p: Exponent, q: Exponent, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::invalid("derivative order must be at least 1"));
    }
    if q.value() < 2.0 {
        return Err(Error::invalid(format!("output metric q must be >= 2, got {q}")));
    }
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::invalid(format!("Wiener index s must lie in [1, inf), got {s}")));
    }
    let threshold = smoothness_threshold(s, q, r);
    if !(mu > threshold) {
        return Err(Error::OutsideHypothesis(format!(
            "mu = {mu} must exceed 2r - 1/s - 2/q + 3/2 = {threshold} (r = {r}, s = {s}, q = {q})"
        )));
    }
    let denom = rate_denominator(mu, p, s);
    if !(denom > 0.0) {
        return Err(Error::OutsideHypothesis(format!("mu - 1/p + 1/s = {denom} is not positive")));
    }
    Ok((mu - threshold) / denom)
}

/// Predicted exponent of the noise-propagation term in `N`:
/// `‖D_N f − D_N f^δ‖_q ≲ δ N^{2r − 1/p − 2/q + 3/2}`.
pub fn propagation_exponent(p: Exponent, q: Exponent, r: usize) -> f64 {
    2.0 * r as f64 - p.reciprocal() - 2.0 * q.reciprocal() + 1.5
}

/// Predicted exponent of the truncation term in `N`:
/// `‖f^{(r)} − D_N f‖_q ≲ N^{−μ + 2r − 1/s − 2/q + 3/2}`.
pub fn truncation_exponent(mu: f64, s: f64, q: Exponent, r: usize) -> f64 {
    -mu + 2.0 * r as f64 - 1.0 / s - 2.0 * q.reciprocal() + 1.5
}

/// Ordinary least-squares line `y = slope · x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares on `(x, y)` pairs; needs at least two distinct `x`.
///
/// `R²` is reported as 1 when `y` is constant (the fit is then exact).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("regression inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let syy: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - (slope * xi + intercept)).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// `log10(y)` against `log10(x)`; every value must be strictly positive.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if let Some(bad) = x.iter().chain(y).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit(format!(
            "log-log fit needs positive finite data, found {bad}"
        )));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    linear_fit(&lx, &ly)
}

/// Which part of the error was fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorComponent {
    Total,
    Truncation,
    Propagation,
}

/// What the error was regressed against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    /// `log10 error` vs `log10 δ`.
    Delta,
    /// `log10 error` vs `log10 N`.
    TruncationLevel,
}

/// A fitted exponent alongside the predicted one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Predicted exponent; `None` when the model parameters are unknown.
    pub theoretical: Option<f64>,
    pub q: Exponent,
    pub component: ErrorComponent,
    pub regressor: Regressor,
}

/// Outcome of comparing a fitted slope with its prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVerdict {
    /// Within `tolerance` of the prediction.
    Consistent,
    /// Decays faster than predicted; the bound still holds.
    FasterThanPredicted,
    /// Slower than the bound allows.
    Slower,
    /// No prediction available.
    Unknown,
}

impl RateFit {
    pub(crate) fn from_fit(
        fit: LinearFit,
        theoretical: Option<f64>,
        q: Exponent,
        component: ErrorComponent,
        regressor: Regressor,
    ) -> Self {
        RateFit {
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            theoretical,
            q,
            component,
            regressor,
        }
    }

    /// One-sided check for `δ`-rates: the upper bound only demands
    /// `slope ≥ theoretical − tolerance`.
    pub fn verdict(&self, tolerance: f64) -> RateVerdict {
        match self.theoretical {
            None => RateVerdict::Unknown,
            Some(th) if self.slope < th - tolerance => RateVerdict::Slower,
            Some(th) if self.slope > th + tolerance => RateVerdict::FasterThanPredicted,
            Some(_) => RateVerdict::Consistent,
        }
    }
}
