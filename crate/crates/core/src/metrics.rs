//! `L_q[-1, 1]` norms (`2 ≤ q ≤ ∞`) and the truncation/propagation split of
//! the reconstruction error.
//!
//! The uniform (`C`) norm and the `L_∞` norm coincide for the continuous
//! functions handled here; both are `q = ∞`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::quadrature::{gauss_legendre, pairwise_sum, QuadratureRule};
use crate::series::LegendreSeries;
use crate::truncation::{self, DerivativePlan};

pub const DEFAULT_GRID_SIZE: usize = 4097;
pub const DEFAULT_PANELS: usize = 64;
pub const DEFAULT_NODES_PER_PANEL: usize = 16;

/// Candidate local maxima refined by golden-section search in the sup norm.
const SUP_REFINE_CANDIDATES: usize = 8;
const GOLDEN_STEPS: usize = 60;

/// Largest series degree measured with the configured discretization.
pub const RESOLVED_DEGREE: usize = 64;

/// Output metric and its discretization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub q: Exponent,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_nodes_per_panel")]
    pub nodes_per_panel: usize,
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_panels() -> usize {
    DEFAULT_PANELS
}

fn default_nodes_per_panel() -> usize {
    DEFAULT_NODES_PER_PANEL
}

impl MetricSpec {
    /// Metric `L_q` with default discretization.
    pub fn new(q: Exponent) -> Result<Self> {
        let spec = MetricSpec {
            q,
            grid_size: DEFAULT_GRID_SIZE,
            panels: DEFAULT_PANELS,
            nodes_per_panel: DEFAULT_NODES_PER_PANEL,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sup() -> Self {
        MetricSpec::new(Exponent::INFINITY).expect("q = inf is valid")
    }

    pub fn l2() -> Self {
        MetricSpec::new(Exponent::TWO).expect("q = 2 is valid")
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Result<Self> {
        self.grid_size = grid_size;
        self.validate()?;
        Ok(self)
    }

    pub fn with_panels(mut self, panels: usize, nodes_per_panel: usize) -> Result<Self> {
        self.panels = panels;
        self.nodes_per_panel = nodes_per_panel;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.value() < 2.0 {
            return Err(Error::invalid(format!("output metric q must be >= 2, got {}", self.q)));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("sup-norm grid needs at least 2 points"));
        }
        if self.panels == 0 || self.nodes_per_panel == 0 {
            return Err(Error::invalid("composite quadrature needs at least one panel and node"));
        }
        Ok(())
    }
}

/// A reusable norm evaluator: the composite rule or sup grid is built once.
#[derive(Clone, Debug)]
pub struct LqNorm {
    spec: MetricSpec,
    kind: NormKind,
}

#[derive(Clone, Debug)]
enum NormKind {
    Quadrature(QuadratureRule),
    Grid(Vec<f64>),
}

impl LqNorm {
    pub fn new(spec: &MetricSpec) -> Result<Self> {
        spec.validate()?;
        Ok(LqNorm { spec: *spec, kind: Self::build(spec)? })
    }

    fn build(spec: &MetricSpec) -> Result<NormKind> {
        let kind = if spec.q.is_infinite() {
            let last = (spec.grid_size - 1) as f64;
            let grid = (0..spec.grid_size)
                .map(|i| (-1.0 + 2.0 * i as f64 / last).clamp(-1.0, 1.0))
                .collect();
            NormKind::Grid(grid)
        } else {
            NormKind::Quadrature(QuadratureRule::composite(spec.panels, spec.nodes_per_panel)?)
        };
        Ok(kind)
    }

    pub fn q(&self) -> Exponent {
        self.spec.q
    }

    /// `‖g‖_q` on `[-1, 1]`.
    pub fn norm<G>(&self, g: G) -> Result<f64>
    where
        G: Fn(f64) -> f64 + Sync,
    {
        Self::eval(self.spec.q, &self.kind, g)
    }

    fn eval<G>(q: Exponent, kind: &NormKind, g: G) -> Result<f64>
    where
        G: Fn(f64) -> f64 + Sync,
    {
        match kind {
            NormKind::Quadrature(rule) => {
                let q = q.value();
                let terms: Vec<f64> = rule
                    .nodes()
                    .par_iter()
                    .zip(rule.weights().par_iter())
                    .map(|(&t, &w)| {
                        let v = checked(&g, t)?;
                        Ok(if q == 2.0 { w * v * v } else { w * v.abs().powf(q) })
                    })
                    .collect::<Result<_>>()?;
                Ok(pairwise_sum(&terms).powf(1.0 / q))
            }
            NormKind::Grid(grid) => {
                let values: Vec<f64> = grid
                    .par_iter()
                    .map(|&t| checked(&g, t).map(f64::abs))
                    .collect::<Result<_>>()?;
                Ok(refine_sup(&g, grid, &values))
            }
        }
    }

    /// Norm of a coefficient series.
    ///
    /// Uniform panels and grids under-resolve high-degree polynomials near
    /// `±1`. Beyond [`RESOLVED_DEGREE`] a global Gauss rule with `2(d + 1)` nodes
    /// (exact for `q = 2`) replaces the composite rule, and the sup grid gains
    /// cosine-spaced points, which follow the clustering of oscillations
    /// near `±1`.
    pub fn series_norm(&self, series: &LegendreSeries) -> Result<f64> {
        let g = |t| series.evaluate_unchecked(t);
        let degree = series.len().saturating_sub(1);
        if degree <= RESOLVED_DEGREE {
            return self.norm(g);
        }
        let size = 2 * (degree + 1);
        let kind = match &self.kind {
            NormKind::Quadrature(_) => NormKind::Quadrature(gauss_legendre(size)?),
            NormKind::Grid(grid) => {
                let mut merged: Vec<f64> = (0..=size)
                    .map(|j| (PI * j as f64 / size as f64).cos())
                    .chain(grid.iter().copied())
                    .collect();
                merged.sort_by(f64::total_cmp);
                merged.dedup();
                NormKind::Grid(merged)
            }
        };
        Self::eval(self.spec.q, &kind, g)
    }
}

fn checked<G: Fn(f64) -> f64>(g: &G, t: f64) -> Result<f64> {
    let value = g(t);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { t, value })
    }
}

/// Grid maximum, polished by golden-section search around the largest
/// local maxima of `|g|` on the grid. Never below the plain grid maximum.
fn refine_sup<G: Fn(f64) -> f64>(g: &G, grid: &[f64], values: &[f64]) -> f64 {
    let n = values.len();
    let grid_max = values.iter().copied().fold(0.0, f64::max);
    if n < 3 {
        return grid_max;
    }
    let mut peaks: Vec<usize> = (1..n - 1)
        .filter(|&i| values[i] >= values[i - 1] && values[i] >= values[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks.truncate(SUP_REFINE_CANDIDATES);

    let abs_g = |t: f64| g(t).abs();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = grid_max;
    for i in peaks {
        let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (abs_g(c), abs_g(d));
        for _ in 0..GOLDEN_STEPS {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = abs_g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = abs_g(d);
            }
        }
        let local = fc.max(fd);
        if local.is_finite() && local > best {
            best = local;
        }
    }
    best
}

/// `‖g‖_q` for a function on `[-1, 1]`.
pub fn lq_norm<G>(g: G, spec: &MetricSpec) -> Result<f64>
where
    G: Fn(f64) -> f64 + Sync,
{
    LqNorm::new(spec)?.norm(g)
}

/// Reference `r`-th derivative of the exact function.
#[derive(Clone, Copy)]
pub enum DerivativeReference<'a> {
    /// Coefficients of `f^{(r)}`; enables the coefficient-space check at `q = 2`.
    Series(&'a LegendreSeries),
    Function(&'a (dyn Fn(f64) -> f64 + Sync)),
}

/// The three error norms of one reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖f^{(r)} − D_N^{(r)} f‖_q`
    pub truncation_error: f64,
    /// `‖D_N^{(r)} f − D_N^{(r)} f^δ‖_q`
    pub propagation_error: f64,
    /// `‖f^{(r)} − D_N^{(r)} f^δ‖_q`
    pub total_error: f64,
    pub q: Exponent,
    pub r: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    /// Largest gap between the quadrature and Parseval routes, when both apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parseval_discrepancy: Option<f64>,
}

/// Splits `f^{(r)} − D_N^{(r)} f^δ` into truncation and noise-propagation
/// parts and measures all three in `L_q`.
pub fn decompose(
    exact: &LegendreSeries,
    perturbed: &LegendreSeries,
    plan: &DerivativePlan,
    reference: DerivativeReference<'_>,
    spec: &MetricSpec,
    delta: f64,
) -> Result<ErrorReport> {
    let norm = LqNorm::new(spec)?;
    decompose_with(exact, perturbed, plan, reference, &norm, delta)
}

/// [`decompose`] with a prebuilt norm evaluator.
pub fn decompose_with(
    exact: &LegendreSeries,
    perturbed: &LegendreSeries,
    plan: &DerivativePlan,
    reference: DerivativeReference<'_>,
    norm: &LqNorm,
    delta: f64,
) -> Result<ErrorReport> {
    if exact.len() != perturbed.len() {
        return Err(Error::invalid(format!(
            "exact and perturbed series cover different index ranges ({} vs {})",
            exact.len(),
            perturbed.len()
        )));
    }
    let n = plan
        .n()
        .ok_or_else(|| Error::invalid("derivative plan has no concrete truncation level"))?;
    let clean = truncation::apply(exact, plan)?;
    let noisy = truncation::apply(perturbed, plan)?;
    let propagation = &clean - &noisy;
    let propagation_error = norm.series_norm(&propagation)?;

    let (truncation_error, total_error, parseval_discrepancy) = match reference {
        DerivativeReference::Series(target) => {
            let trunc = target - &clean;
            let total = target - &noisy;
            let truncation_error = norm.series_norm(&trunc)?;
            let total_error = norm.series_norm(&total)?;
            let discrepancy = (norm.q() == Exponent::TWO).then(|| {
                [
                    (truncation_error, &trunc),
                    (propagation_error, &propagation),
                    (total_error, &total),
                ]
                .iter()
                .map(|(quad, s)| (quad - s.l2_norm()).abs())
                .fold(0.0, f64::max)
            });
            (truncation_error, total_error, discrepancy)
        }
        DerivativeReference::Function(target) => {
            let truncation_error = norm.norm(|t| target(t) - clean.evaluate_unchecked(t))?;
            let total_error = norm.norm(|t| target(t) - noisy.evaluate_unchecked(t))?;
            (truncation_error, total_error, None)
        }
    };

    Ok(ErrorReport {
        truncation_error,
        propagation_error,
        total_error,
        q: norm.q(),
        r: plan.r(),
        n,
        delta,
        parseval_discrepancy,
    })
}
