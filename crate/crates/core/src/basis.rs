//! Orthonormal Legendre polynomials on `[-1, 1]`.
//!
//! `φ_k(t) = sqrt(k + 1/2) · P_k(t)` where `P_k` is the classical Legendre
//! polynomial, so that `∫ φ_j φ_k dt = δ_jk`.

use crate::error::{Error, Result};

/// Largest polynomial index accepted by the public evaluation routines.
pub const MAX_INDEX: usize = 10_000;

/// Normalization factor `sqrt(k + 1/2)` taking `P_k` to `φ_k`.
#[inline]
pub fn normalization(k: usize) -> f64 {
    (k as f64 + 0.5).sqrt()
}

pub(crate) fn check_point(t: f64) -> Result<()> {
    if !t.is_finite() || t.abs() > 1.0 {
        return Err(Error::OutOfDomain(t));
    }
    Ok(())
}

fn check_index(k: usize) -> Result<()> {
    if k > MAX_INDEX {
        return Err(Error::invalid(format!(
            "polynomial index {k} exceeds the supported maximum {MAX_INDEX}"
        )));
    }
    Ok(())
}

/// Classical `P_n(t)` by the three-term recurrence, no argument checks.
pub(crate) fn legendre_p(n: usize, t: f64) -> f64 {
    let (mut prev, mut curr) = (1.0, t);
    if n == 0 {
        return prev;
    }
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * t * curr - jf * prev) / (jf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// `(P_n(t), P_n'(t))` for `|t| < 1`, used by the Gauss rule construction.
pub(crate) fn legendre_p_and_deriv(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut curr) = (1.0, t);
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * t * curr - jf * prev) / (jf + 1.0);
        prev = curr;
        curr = next;
    }
    let nf = n as f64;
    let deriv = nf * (t * curr - prev) / (t * t - 1.0);
    (curr, deriv)
}

/// Evaluates `φ_k(t)`.
pub fn eval_phi(k: usize, t: f64) -> Result<f64> {
    check_index(k)?;
    check_point(t)?;
    Ok(normalization(k) * legendre_p(k, t))
}

/// Evaluates the `r`-th derivative `φ_k^{(r)}(t)`.
///
/// Differentiating `(j+1) P_{j+1} = (2j+1) t P_j − j P_{j−1}` `m` times gives
///
/// ```text
/// (j+1) P_{j+1}^{(m)} = (2j+1) (t P_j^{(m)} + m P_j^{(m−1)}) − j P_{j−1}^{(m)}
/// ```
///
/// which is swept upward in `j` for all orders `0..=r` at once. The result is
/// exactly zero when `r > k`.
pub fn eval_phi_deriv(k: usize, r: usize, t: f64) -> Result<f64> {
    if r == 0 {
        return Err(Error::invalid("derivative order must be at least 1"));
    }
    check_index(k)?;
    check_point(t)?;
    if r > k {
        return Ok(0.0);
    }

    // prev[m] = P_{j-1}^{(m)}, curr[m] = P_j^{(m)}, starting at j = 1.
    let mut prev = vec![0.0; r + 1];
    let mut curr = vec![0.0; r + 1];
    prev[0] = 1.0;
    curr[0] = t;
    curr[1] = 1.0;
    let mut next = vec![0.0; r + 1];
    for j in 1..k {
        let jf = j as f64;
        let a = 2.0 * jf + 1.0;
        next[0] = (a * t * curr[0] - jf * prev[0]) / (jf + 1.0);
        for m in 1..=r {
            next[m] = (a * (t * curr[m] + m as f64 * curr[m - 1]) - jf * prev[m]) / (jf + 1.0);
        }
        std::mem::swap(&mut prev, &mut curr);
        std::mem::swap(&mut curr, &mut next);
    }
    Ok(normalization(k) * curr[r])
}

/// `max_{|t| ≤ 1} |φ_k(t)| = φ_k(1) = sqrt(k + 1/2)`.
pub fn sup_norm_phi(k: usize) -> Result<f64> {
    check_index(k)?;
    Ok(normalization(k))
}
