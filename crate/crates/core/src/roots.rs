//! Inversion of nondecreasing scalar maps by bisection.

use crate::error::{PeakonError, Result};

pub const MAX_BISECTION_STEPS: usize = 200;

/// Largest `x` with `f(x) < target`, for nondecreasing `f`.
///
/// Starting from `[lo, hi]` the bracket is widened geometrically until
/// `f(lo) < target <= f(hi)`. Iteration stops once the bracket width drops
/// below `x_tol * (1 + |x|)` or `|f(x) - target| <= f_tol * (1 + |target|)`.
/// A jump of `f` across `target` converges to the jump location, which is
/// the supremum definition used for measures with atoms.
pub fn sup_below<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
) -> Result<f64> {
    if !(target.is_finite() && lo.is_finite() && hi.is_finite()) {
        return Err(PeakonError::Convergence(format!(
            "non-finite input (target {target}, bracket [{lo}, {hi}])"
        )));
    }
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut width = (hi - lo).max(1.0);
    let mut expansions = 0;
    while f(lo) >= target {
        lo -= width;
        width *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(PeakonError::Convergence(format!(
                "could not bracket target {target} from below"
            )));
        }
    }
    let mut width = (hi - lo).max(1.0);
    expansions = 0;
    while f(hi) < target {
        hi += width;
        width *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(PeakonError::Convergence(format!(
                "could not bracket target {target} from above"
            )));
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let value = f(mid);
        if !value.is_finite() {
            return Err(PeakonError::Convergence(format!(
                "map is not finite at x = {mid}"
            )));
        }
        if (value - target).abs() <= f_tol * (1.0 + target.abs()) {
            return Ok(mid);
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= x_tol * (1.0 + mid.abs()) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(PeakonError::Convergence(format!(
        "no convergence after {MAX_BISECTION_STEPS} steps for target {target}"
    )))
}
