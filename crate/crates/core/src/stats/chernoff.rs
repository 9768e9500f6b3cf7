//! Chernoff-bound inversions between observed counts and their expectations.
//!
//! Every bound here solves an equation of the form `X * g(delta) = ln(xi / 2)`
//! where `g` is negative, strictly decreasing on the relevant interval and
//! vanishes quadratically at zero. The equations are solved in log form by
//! bisection, so counts up to `1e15` never overflow the exponentials.

use crate::error::{check_non_negative, check_open_probability, Result};

/// Bounds produced by one Chernoff inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffResult {
    pub lower: f64,
    pub upper: f64,
    /// Relative deviation used for `lower`.
    pub delta_lower: f64,
    /// Relative deviation used for `upper`.
    pub delta_upper: f64,
    pub failure_prob: f64,
}

/// Brackets the expected value of a sum of Bernoulli variables from its
/// observed value `observed`.
///
/// Returns `observed / (1 + d1)` and `observed / (1 - d2)`. At `observed = 0`
/// the lower bound is 0 and the upper bound is the limit `ln(2 / xi)`.
pub fn chernoff_expected_bounds(observed: f64, failure_prob: f64) -> Result<ChernoffResult> {
    check_non_negative("observed", observed)?;
    check_open_probability("failure_prob", failure_prob)?;
    let log_target = (2.0 / failure_prob).ln();
    if observed == 0.0 {
        return Ok(ChernoffResult {
            lower: 0.0,
            upper: log_target,
            delta_lower: f64::INFINITY,
            delta_upper: 1.0,
            failure_prob,
        });
    }
    let guess = gaussian_guess(observed, log_target);

    let residual_lower = |d: f64| observed * expected_lower_exponent(d) + log_target;
    let (delta_lower, lower) = match solve_unbounded(residual_lower, guess) {
        Some(d) => (d, observed / (1.0 + d)),
        None => (f64::INFINITY, 0.0),
    };

    let (delta_upper, upper) = if observed * expected_upper_exponent(0.5) + log_target < 0.0 {
        let residual = |d: f64| observed * expected_upper_exponent(d) + log_target;
        let mut lo = (0.1 * guess).min(0.25);
        if residual(lo) < 0.0 {
            lo = 0.0;
        }
        let d = bisect_decreasing(residual, lo, 0.5);
        (d, observed / (1.0 - d))
    } else {
        // Root lies in [0.5, 1): solve for t = 1 - d so that tiny counts keep
        // full precision in observed / t.
        let t = bisect_decreasing(
            |t| -(observed * expected_upper_exponent_complement(t) + log_target),
            f64::MIN_POSITIVE,
            0.5,
        );
        (1.0 - t, observed / t)
    };

    Ok(ChernoffResult {
        lower,
        upper,
        delta_lower,
        delta_upper,
        failure_prob,
    })
}

/// Brackets the observed value of a sum of Bernoulli variables from its
/// expectation `expected`.
///
/// Returns `(1 - d2') * expected` (clamped at 0) and `(1 + d1') * expected`.
/// At `expected = 0` the upper bound is the limit convention `ln(2 / xi)`.
pub fn chernoff_observed_bounds(expected: f64, failure_prob: f64) -> Result<ChernoffResult> {
    check_non_negative("expected", expected)?;
    check_open_probability("failure_prob", failure_prob)?;
    let log_target = (2.0 / failure_prob).ln();
    if expected == 0.0 {
        return Ok(ChernoffResult {
            lower: 0.0,
            upper: log_target,
            delta_lower: 1.0,
            delta_upper: f64::INFINITY,
            failure_prob,
        });
    }
    let guess = gaussian_guess(expected, log_target);

    let residual_upper = |d: f64| expected * observed_upper_exponent(d) + log_target;
    let delta_upper = solve_unbounded(residual_upper, guess).unwrap_or(f64::INFINITY);
    let upper = (1.0 + delta_upper) * expected;

    // The exponent reaches -expected at d = 1, so no root exists when the
    // expectation is below ln(2 / xi); the lower bound is then vacuous.
    let (delta_lower, lower) = if expected * observed_lower_exponent(1.0) + log_target >= 0.0 {
        (1.0, 0.0)
    } else {
        let d = bisect_decreasing(
            |d| expected * observed_lower_exponent(d) + log_target,
            0.0,
            1.0,
        );
        (d, ((1.0 - d) * expected).max(0.0))
    };

    Ok(ChernoffResult {
        lower,
        upper,
        delta_lower,
        delta_upper,
        failure_prob,
    })
}

/// Shorthand for the expected-value lower bound.
pub fn expected_lower(observed: f64, failure_prob: f64) -> Result<f64> {
    Ok(chernoff_expected_bounds(observed, failure_prob)?.lower)
}

/// Shorthand for the expected-value upper bound.
pub fn expected_upper(observed: f64, failure_prob: f64) -> Result<f64> {
    Ok(chernoff_expected_bounds(observed, failure_prob)?.upper)
}

/// Shorthand for the observed-value lower bound.
pub fn observed_lower(expected: f64, failure_prob: f64) -> Result<f64> {
    Ok(chernoff_observed_bounds(expected, failure_prob)?.lower)
}

/// Shorthand for the observed-value upper bound.
pub fn observed_upper(expected: f64, failure_prob: f64) -> Result<f64> {
    Ok(chernoff_observed_bounds(expected, failure_prob)?.upper)
}

fn gaussian_guess(count: f64, log_target: f64) -> f64 {
    (2.0 * log_target / count).sqrt()
}

const SERIES_CUTOFF: f64 = 1e-2;

/// Sums `sum_{k>=2} coeff(k) d^k` to double precision for `|d| < SERIES_CUTOFF`.
fn small_series(d: f64, coeff: impl Fn(f64) -> f64) -> f64 {
    let mut power = d * d;
    let mut sum = 0.0;
    for k in 2..16 {
        sum += coeff(k as f64) * power;
        power *= d;
    }
    sum
}

/// `d / (1 + d) - ln(1 + d)`, the log of the lower expected-value equation per unit count.
pub(crate) fn expected_lower_exponent(d: f64) -> f64 {
    if d < SERIES_CUTOFF {
        small_series(d, |k| {
            let sign = if k as i64 % 2 == 0 { -1.0 } else { 1.0 };
            sign * (1.0 - 1.0 / k)
        })
    } else {
        d / (1.0 + d) - d.ln_1p()
    }
}

/// `-d / (1 - d) - ln(1 - d)`.
pub(crate) fn expected_upper_exponent(d: f64) -> f64 {
    if d < SERIES_CUTOFF {
        small_series(d, |k| -(1.0 - 1.0 / k))
    } else {
        -d / (1.0 - d) - (-d).ln_1p()
    }
}

/// [`expected_upper_exponent`] written in `t = 1 - d`.
fn expected_upper_exponent_complement(t: f64) -> f64 {
    -(1.0 - t) / t - t.ln()
}

/// `d - (1 + d) ln(1 + d)`.
pub(crate) fn observed_upper_exponent(d: f64) -> f64 {
    if d < SERIES_CUTOFF {
        small_series(d, |k| {
            let sign = if k as i64 % 2 == 0 { -1.0 } else { 1.0 };
            sign / (k * (k - 1.0))
        })
    } else {
        d - (1.0 + d) * d.ln_1p()
    }
}

/// `-d - (1 - d) ln(1 - d)`; equals -1 at `d = 1`.
pub(crate) fn observed_lower_exponent(d: f64) -> f64 {
    if d >= 1.0 {
        -1.0
    } else if d < SERIES_CUTOFF {
        small_series(d, |k| -1.0 / (k * (k - 1.0)))
    } else {
        -d - (1.0 - d) * (-d).ln_1p()
    }
}

/// Root of a decreasing function on `(0, inf)`, starting from a bracket of
/// `[0.1, 10]` times `guess` and widening it as needed. `None` when the root is
/// beyond the largest finite double.
fn solve_unbounded(f: impl Fn(f64) -> f64, guess: f64) -> Option<f64> {
    let mut lo = 0.1 * guess;
    let mut hi = 10.0 * guess;
    while f(lo) < 0.0 {
        hi = lo;
        lo *= 0.1;
        if lo < f64::MIN_POSITIVE {
            return Some(0.0);
        }
    }
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 10.0;
        if !hi.is_finite() {
            return None;
        }
    }
    Some(bisect_decreasing(f, lo, hi))
}

/// Bisection for a decreasing function with `f(lo) >= 0 >= f(hi)`.
///
/// Uses geometric midpoints while the bracket spans more than a factor of 4,
/// so a bracket over many decades converges in logarithmic time.
pub(crate) fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
