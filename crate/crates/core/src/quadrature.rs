//! Gauss–Legendre quadrature on `[-1, 1]`.

use std::f64::consts::PI;

use crate::basis::legendre_p_and_deriv;
use crate::error::{Error, Result};

const MAX_NEWTON_STEPS: usize = 100;

/// Nodes and positive weights of an interpolatory rule on `[-1, 1]`.
///
/// Nodes are strictly increasing. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ w_i f(t_i)`, summed pairwise.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.iter().map(|(t, w)| w * f(t)).collect();
        pairwise_sum(&terms)
    }

    /// Composite rule: `panels` equal subintervals of `[-1, 1]`, each carrying
    /// an `nodes_per_panel`-point Gauss rule.
    pub fn composite(panels: usize, nodes_per_panel: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::invalid("composite rule needs at least one panel"));
        }
        let base = gauss_legendre(nodes_per_panel)?;
        let width = 2.0 / panels as f64;
        let half = 0.5 * width;
        let mut nodes = Vec::with_capacity(panels * base.len());
        let mut weights = Vec::with_capacity(panels * base.len());
        for p in 0..panels {
            let mid = -1.0 + (p as f64 + 0.5) * width;
            for (t, w) in base.iter() {
                nodes.push(mid + half * t);
                weights.push(half * w);
            }
        }
        Ok(QuadratureRule { nodes, weights })
    }
}

/// The `n`-point Gauss–Legendre rule.
///
/// Roots of `P_n` are found by Newton's method from the Chebyshev-like guesses
/// `cos(π(i − 1/4)/(n + 1/2))`; only the non-negative half is computed and
/// mirrored, so the rule is exactly symmetric. Weights are
/// `2 / ((1 − t²) P_n'(t)²)`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::invalid("quadrature rule size must be at least 1"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;

    // i = 1 is the largest root.
    for i in 1..=n.div_ceil(2) {
        let mirror = i - 1;
        let slot = n - i;
        if n % 2 == 1 && i == n.div_ceil(2) {
            let (_, dp) = legendre_p_and_deriv(n, 0.0);
            nodes[slot] = 0.0;
            weights[slot] = 2.0 / (dp * dp);
            continue;
        }
        let mut t = (PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON_STEPS {
            let (p, dp) = legendre_p_and_deriv(n, t);
            let step = p / dp;
            t -= step;
            if step.abs() <= 4.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                size: n,
                index: i,
                steps: MAX_NEWTON_STEPS,
            });
        }
        let (_, dp) = legendre_p_and_deriv(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[slot] = t;
        weights[slot] = w;
        nodes[mirror] = -t;
        weights[mirror] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Recursive pairwise summation; reduction order depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}
