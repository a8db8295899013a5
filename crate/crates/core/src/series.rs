//! Fourier–Legendre coefficient sequences and operations on them.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::basis::{check_point, normalization};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, QuadratureRule};

/// Finite expansion `Σ_{k=0}^{K} a_k φ_k` in the orthonormal Legendre basis.
///
/// An empty coefficient vector is the zero function.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeriesRepr")]
pub struct LegendreSeries {
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
struct SeriesRepr {
    coeffs: Vec<f64>,
}

impl TryFrom<SeriesRepr> for LegendreSeries {
    type Error = Error;

    fn try_from(repr: SeriesRepr) -> Result<Self> {
        LegendreSeries::new(repr.coeffs)
    }
}

impl LegendreSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(k) = coeffs.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid(format!("coefficient a_{k} is not finite")));
        }
        Ok(LegendreSeries { coeffs })
    }

    pub fn zero() -> Self {
        LegendreSeries { coeffs: Vec::new() }
    }

    /// `value · φ_k`.
    pub fn monomial(k: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = value;
        LegendreSeries { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when every stored coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// Largest stored index `K`, or `None` for the empty series.
    pub fn max_index(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient `a_k`, zero beyond the stored range.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `Σ a_k φ_k(t)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_point(t)?;
        Ok(self.evaluate_unchecked(t))
    }

    /// Clenshaw recurrence on `P_k` with coefficients `a_k sqrt(k + 1/2)`.
    ///
    /// With `P_{k+1} = α_k P_k + β_k P_{k−1}`, `α_k = (2k+1)t/(k+1)` and
    /// `β_k = −k/(k+1)`, the sum is `c_0 + t b_1 − b_2 / 2`.
    pub(crate) fn evaluate_unchecked(&self, t: f64) -> f64 {
        let n = self.coeffs.len();
        match n {
            0 => return 0.0,
            1 => return self.coeffs[0] * normalization(0),
            _ => {}
        }
        let (mut b1, mut b2) = (0.0, 0.0);
        for k in (1..n).rev() {
            let kf = k as f64;
            let alpha = (2.0 * kf + 1.0) * t / (kf + 1.0);
            let beta_next = -(kf + 1.0) / (kf + 2.0);
            let b = self.coeffs[k] * normalization(k) + alpha * b1 + beta_next * b2;
            b2 = b1;
            b1 = b;
        }
        self.coeffs[0] * normalization(0) + t * b1 - 0.5 * b2
    }

    /// Coefficients of the exact first derivative.
    ///
    /// `b_l = 2 sqrt(l + 1/2) Σ_{k > l, k + l odd} sqrt(k + 1/2) a_k`, computed
    /// with one suffix accumulator per parity so the whole sweep is `O(K)`.
    /// The result is one coefficient shorter than the input.
    pub fn differentiate(&self) -> LegendreSeries {
        let n = self.coeffs.len();
        if n <= 1 {
            return LegendreSeries::zero();
        }
        let mut out = vec![0.0; n - 1];
        let mut suffix = [0.0f64; 2];
        for l in (0..n - 1).rev() {
            let k = l + 1;
            suffix[k % 2] += normalization(k) * self.coeffs[k];
            out[l] = 2.0 * normalization(l) * suffix[k % 2];
        }
        LegendreSeries { coeffs: out }
    }

    /// `r`-fold application of [`LegendreSeries::differentiate`].
    pub fn differentiate_n(&self, r: usize) -> Result<LegendreSeries> {
        if r == 0 {
            return Err(Error::invalid("derivative order must be at least 1"));
        }
        let mut out = self.differentiate();
        for _ in 1..r {
            if out.is_empty() {
                break;
            }
            out = out.differentiate();
        }
        Ok(out)
    }

    /// `ℓ_2` norm of the coefficients; equals the `L_2[-1, 1]` norm of the
    /// represented polynomial.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// `‖·‖_{s,μ}` restricted to the stored indices.
    pub fn wiener_norm(&self, params: WienerParams) -> f64 {
        let WienerParams { s, mu } = params;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| wiener_weight(k, s * mu) * a.abs().powf(s))
            .sum();
        sum.powf(1.0 / s)
    }

    /// Keeps indices `lo..=hi` and zeroes the rest; the result has length
    /// `min(len, hi + 1)`.
    pub fn band(&self, lo: usize, hi: usize) -> LegendreSeries {
        let end = self.coeffs.len().min(hi.saturating_add(1));
        let coeffs = self.coeffs[..end]
            .iter()
            .enumerate()
            .map(|(k, &a)| if k < lo { 0.0 } else { a })
            .collect();
        LegendreSeries { coeffs }
    }

    fn zip_with(&self, other: &LegendreSeries, op: impl Fn(f64, f64) -> f64) -> LegendreSeries {
        let n = self.len().max(other.len());
        let coeffs = (0..n).map(|k| op(self.coeff(k), other.coeff(k))).collect();
        LegendreSeries { coeffs }
    }
}

impl Add for &LegendreSeries {
    type Output = LegendreSeries;

    fn add(self, rhs: &LegendreSeries) -> LegendreSeries {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &LegendreSeries {
    type Output = LegendreSeries;

    fn sub(self, rhs: &LegendreSeries) -> LegendreSeries {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &LegendreSeries {
    type Output = LegendreSeries;

    fn mul(self, rhs: f64) -> LegendreSeries {
        LegendreSeries {
            coeffs: self.coeffs.iter().map(|a| a * rhs).collect(),
        }
    }
}

/// `(max{1, k})^{exponent}`, with weight exactly 1 at `k = 0`.
fn wiener_weight(k: usize, exponent: f64) -> f64 {
    (k.max(1) as f64).powf(exponent)
}

/// Parameters `(s, μ)` of the weighted Wiener class `W_s^μ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WienerRepr")]
pub struct WienerParams {
    pub s: f64,
    pub mu: f64,
}

#[derive(Deserialize)]
struct WienerRepr {
    s: f64,
    mu: f64,
}

impl TryFrom<WienerRepr> for WienerParams {
    type Error = Error;

    fn try_from(repr: WienerRepr) -> Result<Self> {
        WienerParams::new(repr.s, repr.mu)
    }
}

impl WienerParams {
    pub fn new(s: f64, mu: f64) -> Result<Self> {
        if !(s >= 1.0 && s.is_finite()) {
            return Err(Error::invalid(format!("Wiener index s must lie in [1, inf), got {s}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("smoothness mu must be positive, got {mu}")));
        }
        Ok(WienerParams { s, mu })
    }
}

/// Default projection rule size for a degree-`k_max` projection of a
/// non-polynomial function.
pub fn default_rule_size(k_max: usize) -> usize {
    (2 * (k_max + 1)).max(64)
}

/// Fourier–Legendre coefficients `a_k = Σ_i w_i f(t_i) φ_k(t_i)`, `k = 0..=k_max`.
///
/// The rule must have at least `k_max + 1` nodes; it is exact for polynomial
/// `f` whose degree plus `k_max` stays below `2 · rule.len()`.
pub fn project(f: impl Fn(f64) -> f64, k_max: usize, rule: &QuadratureRule) -> Result<LegendreSeries> {
    if rule.len() < k_max + 1 {
        return Err(Error::invalid(format!(
            "a {}-point rule cannot resolve coefficients up to index {k_max}",
            rule.len()
        )));
    }
    let mut coeffs = vec![0.0; k_max + 1];
    for (t, w) in rule.iter() {
        let value = f(t);
        if !value.is_finite() {
            return Err(Error::NonFinite { t, value });
        }
        // φ_k(t_i) by the orthonormal recurrence, accumulated on the fly.
        let wf = w * value;
        let (mut prev, mut curr) = (0.0, normalization(0));
        coeffs[0] += wf * curr;
        for (k, slot) in coeffs.iter_mut().enumerate().skip(1) {
            let next = phi_step(k - 1, t, curr, prev);
            prev = curr;
            curr = next;
            *slot += wf * curr;
        }
    }
    LegendreSeries::new(coeffs)
}

/// [`project`] with a `default_rule_size(k_max)`-point Gauss rule.
pub fn project_default(f: impl Fn(f64) -> f64, k_max: usize) -> Result<LegendreSeries> {
    let rule = gauss_legendre(default_rule_size(k_max))?;
    project(f, k_max, &rule)
}

/// `φ_{j+1}(t)` from `φ_j(t)` and `φ_{j−1}(t)` (orthonormal three-term recurrence).
#[inline]
fn phi_step(j: usize, t: f64, phi_j: f64, phi_jm1: f64) -> f64 {
    let jf = j as f64;
    // a_j = (j+1)/sqrt((2j+1)(2j+3)) is the Jacobi-matrix off-diagonal.
    let a_next = (jf + 1.0) / ((2.0 * jf + 1.0) * (2.0 * jf + 3.0)).sqrt();
    let a_curr = if j == 0 {
        0.0
    } else {
        jf / ((2.0 * jf - 1.0) * (2.0 * jf + 1.0)).sqrt()
    };
    (t * phi_j - a_curr * phi_jm1) / a_next
}

/// A member of the unit ball of `W_s^μ` with near-critical decay:
/// `a_k = κ (max{1, k})^{−μ − 1/s − eps}` for `k = 0..=k_max`, with `κ` chosen
/// so that the finite-range Wiener norm is exactly 1.
pub fn edge_function(params: WienerParams, eps: f64, k_max: usize) -> Result<LegendreSeries> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("edge margin eps must be positive, got {eps}")));
    }
    if k_max == 0 {
        return Err(Error::invalid("edge function needs at least indices 0 and 1"));
    }
    let decay = params.mu + 1.0 / params.s + eps;
    let raw = LegendreSeries {
        coeffs: (0..=k_max).map(|k| wiener_weight(k, -decay)).collect(),
    };
    let norm = raw.wiener_norm(params);
    Ok(&raw * norm.recip())
}

/// Weighted mass `Σ_{k > k_max} k^{sμ} |a_k|^s` that an infinite continuation of
/// [`edge_function`] would carry beyond the stored range, estimated by the
/// integral `κ^s ∫_{k_max}^∞ x^{−1 − s·eps} dx`.
pub fn edge_tail_mass(params: WienerParams, eps: f64, k_max: usize) -> Result<f64> {
    let series = edge_function(params, eps, k_max)?;
    let kappa = series.coeff(0);
    let se = params.s * eps;
    Ok(kappa.powf(params.s) * (k_max as f64).powf(-se) / se)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::basis::{eval_phi, eval_phi_deriv};
    use approx::assert_relative_eq;

    #[test]
    fn project_examples() {
        let rule = gauss_legendre(16).unwrap();
        let s = project(|t| eval_phi(3, t).unwrap(), 5, &rule).unwrap();
        for (k, a) in s.coeffs().iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((a - want).abs() <= 1e-12, "k = {k}: {a}");
        }

        let rule = gauss_legendre(8).unwrap();
        let s = project(|t| t * t, 2, &rule).unwrap();
        assert_relative_eq!(s.coeff(0), 0.47140452079103173, epsilon = 1e-15);
        assert!(s.coeff(1).abs() < 1e-15);
        assert_relative_eq!(s.coeff(2), 0.4216370213557839, epsilon = 1e-15);

        let rule = gauss_legendre(4).unwrap();
        let s = project(|_| 1.0, 1, &rule).unwrap();
        assert_relative_eq!(s.coeff(0), 1.4142135623730951, epsilon = 1e-15);
        assert!(s.coeff(1).abs() < 1e-15);
    }

    #[test]
    fn project_rejects_small_rule_and_nonfinite_values() {
        let rule = gauss_legendre(3).unwrap();
        assert!(project(|t| t, 3, &rule).is_err());
        let err = project(|t| 1.0 / t, 2, &rule).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn evaluate_examples() {
        let s = LegendreSeries::new(vec![1.0]).unwrap();
        assert_eq!(s.evaluate(0.42).unwrap(), 0.7071067811865476);
        let s = LegendreSeries::monomial(2, 1.0);
        assert_relative_eq!(s.evaluate(1.0).unwrap(), 1.5811388300841898, epsilon = 1e-15);
        assert_relative_eq!(s.evaluate(0.0).unwrap(), -0.7905694150420949, epsilon = 1e-15);
        assert!(s.evaluate(-1.2).is_err());
        assert_eq!(LegendreSeries::zero().evaluate(0.3).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_at_one_is_weighted_coefficient_sum() {
        let s = LegendreSeries::new((0..30).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect()).unwrap();
        let want: f64 = s.coeffs().iter().enumerate().map(|(k, a)| a * normalization(k)).sum();
        assert_relative_eq!(s.evaluate(1.0).unwrap(), want, max_relative = 1e-13);
    }

    #[test]
    fn evaluate_matches_direct_summation() {
        let s = LegendreSeries::new((0..25).map(|k| 1.0 / (k as f64 + 1.0)).collect()).unwrap();
        for i in 0..=20 {
            let t = -1.0 + 0.1 * i as f64;
            let direct: f64 = (0..25).map(|k| s.coeff(k) * eval_phi(k, t).unwrap()).sum();
            assert_relative_eq!(s.evaluate(t).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_nonfinite_coefficients() {
        assert!(LegendreSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<LegendreSeries>(r#"{"coeffs": [1.0, 2.0]}"#).is_ok());
    }

    #[test]
    fn differentiate_examples() {
        assert!(LegendreSeries::new(vec![1.0]).unwrap().differentiate().is_zero());
        assert!(LegendreSeries::zero().differentiate().is_empty());

        let d = LegendreSeries::monomial(1, 1.0).differentiate();
        assert_eq!(d.len(), 1);
        assert_relative_eq!(d.coeff(0), 1.7320508075688772, epsilon = 1e-15);

        let d = LegendreSeries::monomial(2, 1.0).differentiate();
        assert_eq!(d.len(), 2);
        assert_eq!(d.coeff(0), 0.0);
        assert_relative_eq!(d.coeff(1), 3.872983346207417, epsilon = 1e-14);
    }

    #[test]
    fn differentiate_n_examples() {
        let d = LegendreSeries::monomial(2, 1.0).differentiate_n(2).unwrap();
        assert_eq!(d.len(), 1);
        assert_relative_eq!(d.coeff(0), 6.708203932499369, epsilon = 1e-14);

        assert!(LegendreSeries::monomial(3, 1.0).differentiate_n(4).unwrap().is_zero());

        let s = LegendreSeries::new(vec![0.0, 1.0, 1.0]).unwrap();
        let d = s.differentiate_n(1).unwrap();
        assert_relative_eq!(d.coeff(0), 1.7320508075688772, epsilon = 1e-15);
        assert_relative_eq!(d.coeff(1), 3.872983346207417, epsilon = 1e-14);

        assert!(s.differentiate_n(0).is_err());
    }

    #[test]
    fn differentiate_matches_pointwise_recurrence() {
        for k in 0..=30 {
            let d = LegendreSeries::monomial(k, 1.0).differentiate();
            for i in 0..50 {
                let t = -1.0 + 2.0 * i as f64 / 49.0;
                let want = if k == 0 { 0.0 } else { eval_phi_deriv(k, 1, t).unwrap() };
                assert!((d.evaluate(t).unwrap() - want).abs() <= 1e-9, "k = {k}, t = {t}");
            }
        }
    }

    #[test]
    fn wiener_norm_examples() {
        let s = LegendreSeries::new(vec![1.0, 0.5, 0.25]).unwrap();
        assert_relative_eq!(s.wiener_norm(WienerParams::new(2.0, 1.0).unwrap()), 1.224744871391589, epsilon = 1e-15);
        let s = LegendreSeries::monomial(1, 0.5);
        assert_eq!(s.wiener_norm(WienerParams::new(1.0, 2.0).unwrap()), 0.5);
        let s = LegendreSeries::monomial(4, 0.1);
        assert_relative_eq!(s.wiener_norm(WienerParams::new(2.0, 1.5).unwrap()), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn wiener_params_validation() {
        assert!(WienerParams::new(0.5, 1.0).is_err());
        assert!(WienerParams::new(2.0, 0.0).is_err());
        assert!(serde_json::from_str::<WienerParams>(r#"{"s": 2, "mu": -1}"#).is_err());
    }

    #[test]
    fn edge_function_examples() {
        let params = WienerParams::new(2.0, 4.0).unwrap();
        let e = edge_function(params, 0.01, 200).unwrap();
        assert_eq!(e.len(), 201);
        assert!((e.wiener_norm(params) - 1.0).abs() <= 1e-10);
        for k in 1..=200usize {
            assert_relative_eq!(e.coeff(k) / e.coeff(1), (k as f64).powf(-4.51), max_relative = 1e-12);
        }

        let params = WienerParams::new(1.0, 3.0).unwrap();
        let e = edge_function(params, 0.1, 100).unwrap();
        let s: f64 = e.coeffs().iter().enumerate().map(|(k, a)| (k.max(1) as f64).powi(3) * a.abs()).sum();
        assert!((s - 1.0).abs() <= 1e-10);

        assert!(edge_function(params, 0.1, 0).is_err());
        assert!(edge_function(params, 0.0, 10).is_err());
    }

    #[test]
    fn edge_tail_mass_is_positive_and_shrinks_with_margin() {
        let params = WienerParams::new(2.0, 4.0).unwrap();
        let small = edge_tail_mass(params, 0.5, 200).unwrap();
        let large = edge_tail_mass(params, 0.01, 200).unwrap();
        assert!(small > 0.0 && small < large);
    }

    #[test]
    fn series_json_shape() {
        let s = LegendreSeries::new(vec![1.0, -0.5]).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"coeffs":[1.0,-0.5]}"#);
    }
}
