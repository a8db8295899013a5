//! The truncated differentiation operator and its a-priori truncation rule.
//!
//! `D_N^{(r)} f^δ = Σ_{k=r}^{N} ⟨f^δ, φ_k⟩ φ_k^{(r)}`: keep coefficients
//! `r..=N`, then differentiate `r` times in coefficient space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::noise::check_delta;
use crate::series::LegendreSeries;

/// Relative slack under which `C_N δ^{−θ}` is treated as an integer before
/// taking the ceiling, so that e.g. `(1e−4)^{−1/4}` gives 10 and not 11.
const CEIL_SLACK: f64 = 1e-9;

/// Truncation level: fixed, or resolved from `(δ, μ, p, s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruncationLevel {
    Fixed(usize),
    Rule { c_n: f64 },
}

/// Derivative order `r` and truncation level `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr", into = "PlanRepr")]
pub struct DerivativePlan {
    r: usize,
    level: TruncationLevel,
}

impl DerivativePlan {
    /// Plan with a fixed truncation level. `n < r` is allowed and yields the
    /// zero operator.
    pub fn fixed(r: usize, n: usize) -> Result<Self> {
        check_order(r)?;
        Ok(DerivativePlan {
            r,
            level: TruncationLevel::Fixed(n),
        })
    }

    /// Plan whose level comes from [`choose_n`] with scale constant `c_n`.
    pub fn rule(r: usize, c_n: f64) -> Result<Self> {
        check_order(r)?;
        check_scale(c_n)?;
        Ok(DerivativePlan {
            r,
            level: TruncationLevel::Rule { c_n },
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn level(&self) -> TruncationLevel {
        self.level
    }

    /// The concrete `N`, if the plan is resolved.
    pub fn n(&self) -> Option<usize> {
        match self.level {
            TruncationLevel::Fixed(n) => Some(n),
            TruncationLevel::Rule { .. } => None,
        }
    }

    /// Resolves a rule-based plan to `max(choose_n(..), r + 1)`. Fixed plans
    /// are returned unchanged.
    pub fn resolve(&self, delta: f64, mu: f64, p: Exponent, s: f64) -> Result<DerivativePlan> {
        match self.level {
            TruncationLevel::Fixed(_) => Ok(*self),
            TruncationLevel::Rule { c_n } => {
                let n = choose_n(delta, mu, p, s, c_n)?.max(self.r + 1);
                DerivativePlan::fixed(self.r, n)
            }
        }
    }

    fn resolved_n(&self) -> Result<usize> {
        self.n()
            .ok_or_else(|| Error::invalid("derivative plan has no concrete truncation level"))
    }
}

fn check_order(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("derivative order must be at least 1"));
    }
    Ok(())
}

fn check_scale(c_n: f64) -> Result<()> {
    if !(c_n > 0.0 && c_n.is_finite()) {
        return Err(Error::invalid(format!("rule constant C_N must be positive, got {c_n}")));
    }
    Ok(())
}

/// `μ − 1/p + 1/s`, the denominator of every rate exponent.
pub fn rate_denominator(mu: f64, p: Exponent, s: f64) -> f64 {
    mu - p.reciprocal() + 1.0 / s
}

/// A-priori truncation level `N = ⌈C_N · δ^{−1/(μ − 1/p + 1/s)}⌉`.
///
/// The `r + 1` floor is applied by [`DerivativePlan::resolve`], not here.
pub fn choose_n(delta: f64, mu: f64, p: Exponent, s: f64, c_n: f64) -> Result<usize> {
    check_delta(delta)?;
    check_scale(c_n)?;
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("smoothness mu must be positive, got {mu}")));
    }
    if !(s >= 1.0) {
        return Err(Error::invalid(format!("Wiener index s must be >= 1, got {s}")));
    }
    let denom = rate_denominator(mu, p, s);
    if !(denom > 0.0) {
        return Err(Error::invalid(format!(
            "mu - 1/p + 1/s must be positive, got {denom}"
        )));
    }
    let x = c_n * delta.powf(-1.0 / denom);
    let nearest = x.round();
    let n = if (x - nearest).abs() <= CEIL_SLACK * x {
        nearest
    } else {
        x.ceil()
    };
    if n > usize::MAX as f64 {
        return Err(Error::invalid("truncation level overflows"));
    }
    Ok(n as usize)
}

/// Applies `D_N^{(r)}` to a (perturbed) coefficient series.
///
/// The result has degree at most `N − r`; `N < r` gives the zero series.
pub fn apply(perturbed: &LegendreSeries, plan: &DerivativePlan) -> Result<LegendreSeries> {
    let n = plan.resolved_n()?;
    if n < plan.r {
        return Ok(LegendreSeries::zero());
    }
    perturbed.band(plan.r, n).differentiate_n(plan.r)
}

/// Number of perturbed coefficients the method consumes, `card([r, N])`.
pub fn coefficient_count(plan: &DerivativePlan) -> Result<usize> {
    let n = plan.resolved_n()?;
    Ok(if n >= plan.r { n - plan.r + 1 } else { 0 })
}

#[derive(Serialize, Deserialize)]
struct PlanRepr {
    r: usize,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<RuleRepr>,
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    #[serde(rename = "C_N")]
    c_n: f64,
}

impl TryFrom<PlanRepr> for DerivativePlan {
    type Error = Error;

    fn try_from(repr: PlanRepr) -> Result<Self> {
        match (repr.n, repr.rule) {
            (Some(n), None) => DerivativePlan::fixed(repr.r, n),
            (None, Some(rule)) => DerivativePlan::rule(repr.r, rule.c_n),
            _ => Err(Error::invalid("plan needs exactly one of \"N\" or \"rule\"")),
        }
    }
}

impl From<DerivativePlan> for PlanRepr {
    fn from(plan: DerivativePlan) -> Self {
        match plan.level {
            TruncationLevel::Fixed(n) => PlanRepr {
                r: plan.r,
                n: Some(n),
                rule: None,
            },
            TruncationLevel::Rule { c_n } => PlanRepr {
                r: plan.r,
                n: None,
                rule: Some(RuleRepr { c_n }),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn choose_n_examples() {
        assert_eq!(choose_n(1e-4, 4.0, Exponent::TWO, 2.0, 1.0).unwrap(), 10);
        assert_eq!(choose_n(1e-2, 2.5, Exponent::INFINITY, 1.0, 1.0).unwrap(), 4);
        assert_eq!(choose_n(0.5, 4.0, Exponent::TWO, 2.0, 2.0).unwrap(), 3);
    }

    #[test]
    fn choose_n_rejects_bad_input() {
        assert!(choose_n(0.0, 4.0, Exponent::TWO, 2.0, 1.0).is_err());
        assert!(choose_n(1.0, 4.0, Exponent::TWO, 2.0, 1.0).is_err());
        assert!(choose_n(0.1, 4.0, Exponent::TWO, 2.0, 0.0).is_err());
        // mu - 1/p + 1/s = 0.1 - 1 + 1 > 0 is fine, but mu = 0 is not a class.
        assert!(choose_n(0.1, 0.0, Exponent::ONE, 1.0, 1.0).is_err());
    }

    #[test]
    fn resolve_floors_at_r_plus_one() {
        let plan = DerivativePlan::rule(3, 1.0).unwrap();
        let resolved = plan.resolve(0.5, 4.0, Exponent::TWO, 2.0).unwrap();
        assert_eq!(resolved.n(), Some(4));
    }

    #[test]
    fn apply_examples() {
        let out = apply(&LegendreSeries::monomial(2, 1.0), &DerivativePlan::fixed(1, 2).unwrap()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.coeff(0), 0.0);
        assert_relative_eq!(out.coeff(1), 3.872983346207417, epsilon = 1e-14);

        let out = apply(&LegendreSeries::monomial(5, 1.0), &DerivativePlan::fixed(1, 3).unwrap()).unwrap();
        assert!(out.is_zero());

        let out = apply(&LegendreSeries::monomial(2, 1.0), &DerivativePlan::fixed(2, 5).unwrap()).unwrap();
        assert_eq!(out.len(), 1);
        assert_relative_eq!(out.coeff(0), 6.708203932499369, epsilon = 1e-14);
    }

    #[test]
    fn apply_degenerate_and_unresolved() {
        let s = LegendreSeries::new(vec![1.0; 6]).unwrap();
        assert!(apply(&s, &DerivativePlan::fixed(3, 2).unwrap()).unwrap().is_zero());
        assert!(apply(&s, &DerivativePlan::rule(1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn coefficient_count_examples() {
        assert_eq!(coefficient_count(&DerivativePlan::fixed(1, 10).unwrap()).unwrap(), 10);
        assert_eq!(coefficient_count(&DerivativePlan::fixed(3, 3).unwrap()).unwrap(), 1);
        assert_eq!(coefficient_count(&DerivativePlan::fixed(2, 1).unwrap()).unwrap(), 0);
        assert!(coefficient_count(&DerivativePlan::rule(1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn plan_json_forms() {
        let plan: DerivativePlan = serde_json::from_str(r#"{"r": 1, "N": 10}"#).unwrap();
        assert_eq!(plan, DerivativePlan::fixed(1, 10).unwrap());
        let plan: DerivativePlan = serde_json::from_str(r#"{"r": 1, "rule": {"C_N": 1.0}}"#).unwrap();
        assert_eq!(plan, DerivativePlan::rule(1, 1.0).unwrap());
        assert!(serde_json::from_str::<DerivativePlan>(r#"{"r": 0, "N": 10}"#).is_err());
        assert!(serde_json::from_str::<DerivativePlan>(r#"{"r": 1}"#).is_err());
        assert_eq!(
            serde_json::to_string(&DerivativePlan::rule(2, 0.5).unwrap()).unwrap(),
            r#"{"r":2,"rule":{"C_N":0.5}}"#
        );
    }

    fn random_series(len: usize, seed: u64) -> LegendreSeries {
        let coeffs = (0..len)
            .map(|k| (((k as u64 + 1).wrapping_mul(seed | 1) % 1000) as f64 - 500.0) / 250.0)
            .collect();
        LegendreSeries::new(coeffs).unwrap()
    }

    proptest! {
        #[test]
        fn nesting_of_partial_sums(len in 2usize..40, seed in any::<u64>(), r in 1usize..4, n in 1usize..40, extra in 0usize..20) {
            // D_{N'} f − D_N f only involves coefficients N+1..=N'.
            let s = random_series(len, seed);
            let small = apply(&s, &DerivativePlan::fixed(r, n).unwrap()).unwrap();
            let large = apply(&s, &DerivativePlan::fixed(r, n + extra).unwrap()).unwrap();
            let tail = apply(&s.band(n + 1, n + extra), &DerivativePlan::fixed(r, n + extra).unwrap()).unwrap();
            let diff = &large - &(&small + &tail);
            let scale = large.coeffs().iter().fold(1.0f64, |m, a| m.max(a.abs()));
            prop_assert!(diff.coeffs().iter().all(|d| d.abs() <= 1e-12 * scale));
        }

        #[test]
        fn linear_in_input(len in 1usize..40, s1 in any::<u64>(), s2 in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, r in 1usize..4, n in 1usize..40) {
            let u = random_series(len, s1);
            let v = random_series(len, s2);
            let plan = DerivativePlan::fixed(r, n).unwrap();
            let lhs = apply(&(&(&u * alpha) + &(&v * beta)), &plan).unwrap();
            let rhs = &(&apply(&u, &plan).unwrap() * alpha) + &(&apply(&v, &plan).unwrap() * beta);
            let scale = lhs.coeffs().iter().chain(rhs.coeffs()).fold(1.0f64, |m, a| m.max(a.abs()));
            let diff = &lhs - &rhs;
            prop_assert!(diff.coeffs().iter().all(|d| d.abs() <= 1e-13 * scale * (n as f64).max(1.0)));
        }

        #[test]
        fn choose_n_scales_by_ten(mu in 1.0f64..4.0, s in 1.0f64..4.0, p_inf in any::<bool>(), pv in 1.0f64..6.0, decades in 4.0f64..12.0) {
            let delta = 10f64.powf(-decades);
            let p = if p_inf { Exponent::INFINITY } else { Exponent::new(pv).unwrap() };
            let denom = rate_denominator(mu, p, s);
            let smaller = delta / 10f64.powf(denom);
            prop_assume!(smaller > 0.0);
            let n = choose_n(delta, mu, p, s, 1.0).unwrap();
            prop_assume!(n >= 20);
            let n10 = choose_n(smaller, mu, p, s, 1.0).unwrap();
            let ratio = n10 as f64 / n as f64;
            let nf = n as f64;
            prop_assert!(ratio >= 10.0 * (1.0 - 1.0 / nf) && ratio <= 10.0 * (1.0 + 1.0 / nf), "{} {}", n, n10);
        }
    }
}
