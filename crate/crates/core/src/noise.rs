//! `ℓ_p`-bounded perturbations of Fourier–Legendre coefficients.
//!
//! Perturbed data are `a_k − ξ_k` with `‖ξ‖_{ℓ_p} = δ`. Every generator
//! saturates the budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::series::LegendreSeries;

/// `(Σ |x_k|^p)^{1/p}`, or `max |x_k|` for `p = ∞`.
///
/// Entries are scaled by the largest magnitude before powering so large `p`
/// does not overflow.
pub fn lp_norm(seq: &[f64], p: Exponent) -> f64 {
    let peak = seq.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if p.is_infinite() || peak == 0.0 {
        return peak;
    }
    let p = p.value();
    if p == 1.0 {
        return seq.iter().map(|x| x.abs()).sum();
    }
    let sum: f64 = seq.iter().map(|x| (x.abs() / peak).powf(p)).sum();
    peak * sum.powf(1.0 / p)
}

/// How the perturbation direction is produced.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseMode {
    /// Independent uniform draws on `[−1, 1]` over `0..=support_max`, rescaled.
    Random { seed: u64 },
    /// Positive, equal-magnitude entries on the listed indices.
    Adversarial { indices: Vec<usize> },
}

/// Noise index `p`, level `δ`, and generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpecRepr", into = "NoiseSpecRepr")]
pub struct NoiseSpec {
    p: Exponent,
    delta: f64,
    mode: NoiseMode,
    support_max: Option<usize>,
}

impl NoiseSpec {
    /// Random mode. `support_max` defaults to the top index of the perturbed
    /// series when `None`.
    pub fn random(p: Exponent, delta: f64, seed: u64, support_max: Option<usize>) -> Result<Self> {
        Self::new(p, delta, NoiseMode::Random { seed }, support_max)
    }

    pub fn adversarial(p: Exponent, delta: f64, indices: Vec<usize>) -> Result<Self> {
        Self::new(p, delta, NoiseMode::Adversarial { indices }, None)
    }

    pub fn new(p: Exponent, delta: f64, mode: NoiseMode, support_max: Option<usize>) -> Result<Self> {
        check_delta(delta)?;
        if let NoiseMode::Adversarial { indices } = &mode {
            if indices.is_empty() {
                return Err(Error::invalid("adversarial index set is empty"));
            }
            if let (Some(max), Some(&top)) = (support_max, indices.iter().max()) {
                if top > max {
                    return Err(Error::invalid(format!(
                        "adversarial index {top} exceeds support_max {max}"
                    )));
                }
            }
        }
        Ok(NoiseSpec {
            p,
            delta,
            mode,
            support_max,
        })
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> &NoiseMode {
        &self.mode
    }

    pub fn support_max(&self) -> Option<usize> {
        self.support_max
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("noise level delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Perturbed coefficients together with the realized error sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    /// `a_k − ξ_k`.
    pub perturbed: LegendreSeries,
    /// `ξ_k = ⟨f − f^δ, φ_k⟩`.
    pub xi: Vec<f64>,
}

/// Draws `ξ` with `‖ξ‖_{ℓ_p} = δ` and returns `f^δ` coefficients.
///
/// The output length covers both the input series and the noise support, so
/// perturbed and original coefficients may be compared index by index.
pub fn perturb(series: &LegendreSeries, spec: &NoiseSpec) -> Result<Perturbation> {
    if series.is_empty() {
        return Err(Error::invalid("cannot perturb an empty series"));
    }
    let xi = match &spec.mode {
        NoiseMode::Random { seed } => {
            let support = spec.support_max.unwrap_or(series.len() - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut xi: Vec<f64> = (0..=support).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let norm = lp_norm(&xi, spec.p);
            if norm == 0.0 {
                return Err(Error::invalid("random draw produced an all-zero direction"));
            }
            let scale = spec.delta / norm;
            xi.iter_mut().for_each(|x| *x *= scale);
            xi
        }
        NoiseMode::Adversarial { indices } => {
            let mut unique = indices.clone();
            unique.sort_unstable();
            unique.dedup();
            let top = *unique.last().expect("non-empty by construction");
            let magnitude = spec.delta * (unique.len() as f64).powf(-spec.p.reciprocal());
            let mut xi = vec![0.0; top + 1];
            for k in unique {
                xi[k] = magnitude;
            }
            xi
        }
    };
    let len = series.len().max(xi.len());
    let mut xi = xi;
    xi.resize(len, 0.0);
    let perturbed = (0..len).map(|k| series.coeff(k) - xi[k]).collect();
    Ok(Perturbation {
        perturbed: LegendreSeries::new(perturbed)?,
        xi,
    })
}

#[derive(Serialize, Deserialize)]
struct NoiseSpecRepr {
    p: Exponent,
    delta: f64,
    mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support_max: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeName {
    Random,
    Adversarial,
}

impl TryFrom<NoiseSpecRepr> for NoiseSpec {
    type Error = Error;

    fn try_from(repr: NoiseSpecRepr) -> Result<Self> {
        let mode = match repr.mode {
            ModeName::Random => NoiseMode::Random {
                seed: repr.seed.unwrap_or(0),
            },
            ModeName::Adversarial => NoiseMode::Adversarial {
                indices: repr
                    .indices
                    .ok_or_else(|| Error::invalid("adversarial noise requires \"indices\""))?,
            },
        };
        NoiseSpec::new(repr.p, repr.delta, mode, repr.support_max)
    }
}

impl From<NoiseSpec> for NoiseSpecRepr {
    fn from(spec: NoiseSpec) -> Self {
        let (mode, indices, seed) = match spec.mode {
            NoiseMode::Random { seed } => (ModeName::Random, None, Some(seed)),
            NoiseMode::Adversarial { indices } => (ModeName::Adversarial, Some(indices), None),
        };
        NoiseSpecRepr {
            p: spec.p,
            delta: spec.delta,
            mode,
            indices,
            seed,
            support_max: spec.support_max,
        }
    }
}
