//! Stable numerical differentiation of noisy data by truncated
//! Fourier–Legendre expansions.
//!
//! Given perturbed coefficients `⟨f^δ, φ_k⟩` with `‖ξ‖_{ℓ_p} ≤ δ`, the
//! `r`-th derivative of `f` is reconstructed as
//!
//! ```text
//! D_N^{(r)} f^δ = Σ_{k=r}^{N} ⟨f^δ, φ_k⟩ φ_k^{(r)}
//! ```
//!
//! with `N ≍ δ^{−1/(μ − 1/p + 1/s)}` for `f` in the weighted Wiener class
//! `W_s^μ`. All differentiation happens in coefficient space.
//!
//! ```
//! use legendre_diff::{project_default, DerivativePlan, truncation};
//!
//! let f = project_default(|t: f64| t.powi(3), 8).unwrap();
//! let plan = DerivativePlan::fixed(1, 8).unwrap();
//! let df = truncation::apply(&f, &plan).unwrap();
//! assert!((df.evaluate(0.5).unwrap() - 0.75).abs() < 1e-12);
//! ```
//!
//! The [`experiment`] module sweeps noise levels and compares the measured
//! error decay with the predicted exponents in [`rates`].
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod experiment;
pub mod exponent;
pub mod json;
pub mod metrics;
pub mod noise;
pub mod quadrature;
pub mod rates;
pub mod series;
pub mod truncation;

pub use basis::{eval_phi, eval_phi_deriv, sup_norm_phi};
pub use error::{Error, Result};
pub use experiment::{
    component_scaling, fit_rate, run_experiment, ComponentScaling, ExperimentConfig, ExperimentTable,
    IndexSelection, NoiseConfig, TruthConfig,
};
pub use exponent::Exponent;
pub use metrics::{decompose, lq_norm, DerivativeReference, ErrorReport, MetricSpec};
pub use noise::{lp_norm, perturb, NoiseMode, NoiseSpec, Perturbation};
pub use quadrature::{gauss_legendre, QuadratureRule};
pub use rates::{theoretical_exponent, RateFit, RateVerdict};
pub use series::{edge_function, project, project_default, LegendreSeries, WienerParams};
pub use truncation::{choose_n, coefficient_count, DerivativePlan};
