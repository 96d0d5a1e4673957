//! Term-by-term summation of Taylor tails of entire bounding functions.

use crate::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-15;

/// Largest admissible relative tolerance.
const MAX_REL_TOL: f64 = 1e-6;

pub(crate) fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if rel_tol > 0.0 && rel_tol <= MAX_REL_TOL {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "relative tolerance must lie in (0, {MAX_REL_TOL:e}], got {rel_tol:e}"
        )))
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")))
    }
}

/// Index of the last term the summation may visit.
///
/// `rate` is the exponential growth rate of the series in units of the
/// expansion variable, so terms peak near `n ≈ rate`.
pub(crate) fn term_cap(first: usize, rate: f64) -> usize {
    let scaled = (20.0 * rate.ceil()).min(1e9) as usize;
    first + 200.max(scaled)
}

/// Sums `term(n)` for `n >= first`, where `term` must be called in order
/// `n = 0, 1, 2, …` (terms are built by recurrence).
///
/// Stops once past the peak of the series, past `min_order` (below which the
/// coefficients may vanish identically), and the current term is at most
/// `rel_tol` times the accumulated sum.
pub(crate) fn sum_tail(
    first: usize,
    rate: f64,
    min_order: usize,
    rel_tol: f64,
    mut term: impl FnMut(usize) -> f64,
) -> Result<f64> {
    let cap = term_cap(first, rate);
    let mut sum = 0.0;
    let mut last = 0.0;
    for n in 0..=cap {
        let t = term(n);
        if !t.is_finite() {
            return Err(Error::NonConvergence {
                terms: n,
                last_term: t,
                partial_sum: sum,
            });
        }
        if n < first {
            continue;
        }
        sum += t;
        last = t;
        if n >= min_order && (n as f64) > rate && t <= rel_tol * sum {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        terms: cap + 1,
        last_term: last,
        partial_sum: sum,
    })
}
