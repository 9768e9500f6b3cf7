//! Concentration-inequality primitives used throughout the estimators.

mod binomial;
mod chernoff;

pub use binomial::{
    binomial_pmf, binomial_tail, invert_tail_for_m, invert_tail_for_p, TailQuery, SUMMATION_LIMIT,
};
pub use chernoff::{
    chernoff_expected_bounds, chernoff_observed_bounds, expected_lower, expected_upper,
    observed_lower, observed_upper, ChernoffResult,
};

use crate::error::{check_probability, Error, Result};

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
///
/// Evaluated on the ordered pair `(min(x, 1-x), max(x, 1-x))`, so `h(x)` and
/// `h(1 - x)` are bitwise equal whenever `1 - x` is exact.
pub fn shannon_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    let (small, large) = if x <= 0.5 { (x, 1.0 - x) } else { (1.0 - x, x) };
    if small == 0.0 {
        return Ok(0.0);
    }
    let nats = -small * small.ln() - large * (-small).ln_1p();
    Ok(nats / std::f64::consts::LN_2)
}

/// Result of [`mcdiarmid_delta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McDiarmidDelta {
    pub delta: f64,
    /// Set when no events entered the estimate and `delta` was forced to 0.
    pub degenerate: bool,
}

/// Bounded-difference deviation of the combined X-window error and vacuum
/// numerator.
///
/// `pulses_x1` and `pulses_oo` are the pulse counts `N_X1` and `N_oo'`,
/// `events` is `n_T = m_X1 + n_oo'`. The combined rate `S_T` is derived from
/// them. Returns
/// `Delta = (S_T / n_T) * sqrt(n_T ln(1/xi) / 2) * (A1 - A2)` with
/// `A1 = (N_X1 + N_oo') / N_X1` and
/// `A2 = -(N_X1 + N_oo') / (2 N_oo') * exp(-mu1 - mu1')`.
pub fn mcdiarmid_delta(
    pulses_x1: f64,
    pulses_oo: f64,
    events: f64,
    mu1: f64,
    mu1_bob: f64,
    failure_prob: f64,
) -> Result<McDiarmidDelta> {
    for (name, v) in [("pulses_x1", pulses_x1), ("pulses_oo", pulses_oo)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, format!("{v} is not a positive count")));
        }
    }
    if !(events.is_finite() && events >= 0.0) {
        return Err(Error::invalid("events", format!("{events} is not a count")));
    }
    check_probability("failure_prob", failure_prob)?;
    if failure_prob == 0.0 {
        return Err(Error::invalid("failure_prob", "must be positive"));
    }
    if events == 0.0 {
        return Ok(McDiarmidDelta {
            delta: 0.0,
            degenerate: true,
        });
    }
    let total = pulses_x1 + pulses_oo;
    let rate = events / total;
    let a1 = total / pulses_x1;
    let a2 = -total / (2.0 * pulses_oo) * (-mu1 - mu1_bob).exp();
    let spread = (events * (1.0 / failure_prob).ln() / 2.0).sqrt();
    Ok(McDiarmidDelta {
        delta: rate / events * spread * (a1 - a2),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn entropy_values() {
        assert_eq!(shannon_entropy(0.5).unwrap(), 1.0);
        assert_eq!(shannon_entropy(0.0).unwrap(), 0.0);
        assert_eq!(shannon_entropy(1.0).unwrap(), 0.0);
        // -0.11 log2 0.11 - 0.89 log2 0.89
        assert_relative_eq!(
            shannon_entropy(0.11).unwrap(),
            0.499_915_958_164_528_2,
            max_relative = 1e-14
        );
        assert!(shannon_entropy(-0.1).is_err());
        assert!(shannon_entropy(1.01).is_err());
        assert!(shannon_entropy(f64::NAN).is_err());
    }

    #[test]
    fn mcdiarmid_unit_failure_prob() {
        let d = mcdiarmid_delta(1e8, 1e8, 1e4, 0.1, 0.1, 1.0).unwrap();
        assert_eq!(d.delta, 0.0);
        assert!(!d.degenerate);
    }

    #[test]
    fn mcdiarmid_no_events() {
        let d = mcdiarmid_delta(1e8, 1e8, 0.0, 0.1, 0.1, 1e-10).unwrap();
        assert_eq!(d.delta, 0.0);
        assert!(d.degenerate);
    }

    #[test]
    fn mcdiarmid_rejects_empty_windows() {
        assert!(mcdiarmid_delta(0.0, 1e8, 1e4, 0.1, 0.1, 1e-10).is_err());
        assert!(mcdiarmid_delta(1e8, 0.0, 1e4, 0.1, 0.1, 1e-10).is_err());
        assert!(mcdiarmid_delta(1e8, 1e8, 1e4, 0.1, 0.1, 0.0).is_err());
    }
}
