//! Finite-key decoy-state bounds on untagged events and their phase-flip
//! error rate.
//!
//! Two interchangeable phase-error estimators implement
//! [`PhaseErrorEstimator`]: [`ChernoffEstimator`] bounds the two numerator
//! terms separately, [`McDiarmidEstimator`] bounds the numerator as a whole.

use crate::budget::SecurityBudget;
use crate::channel::{ObservedStats, SourceCount};
use crate::error::Result;
use crate::flags::{Flag, Flags};
use crate::params::{ExperimentalParams, SourceParams};
use crate::stats::{expected_lower, expected_upper, mcdiarmid_delta};

/// Lower and upper bounds on the expected counting rate of one source.
fn expected_rate_bounds(count: &SourceCount, xi: f64, finite_key: bool) -> Result<(f64, f64)> {
    if count.pulses <= 0.0 {
        return Ok((0.0, f64::INFINITY));
    }
    if !finite_key {
        let r = count.rate();
        return Ok((r, r));
    }
    Ok((
        expected_lower(count.clicks, xi)? / count.pulses,
        expected_upper(count.clicks, xi)? / count.pulses,
    ))
}

/// Two-intensity decoy bound on the single-photon counting rate of one party.
///
/// `weak`, `strong` and `vacuum` are `(lower, upper)` bounds on the expected
/// counting rates. The weak term enters with a positive coefficient and takes
/// its lower bound, the others take their upper bounds.
fn decoy_single_photon_rate(
    mu1: f64,
    mu2: f64,
    weak: (f64, f64),
    strong: (f64, f64),
    vacuum: (f64, f64),
) -> f64 {
    let numerator = mu2 * mu2 * mu1.exp() * weak.0
        - mu1 * mu1 * mu2.exp() * strong.1
        - (mu2 * mu2 - mu1 * mu1) * vacuum.1;
    numerator / (mu2 * mu1 * (mu2 - mu1))
}

/// Lower bounds `(s01, s10)` on the expected counting rates of the untagged
/// single-photon states, clamped at 0.
pub fn bound_s01_s10(
    obs: &ObservedStats,
    src: &SourceParams,
    budget: &SecurityBudget,
) -> Result<(f64, f64, Flags)> {
    let xi = budget.xi_default;
    let fk = budget.finite_key;
    let d = &obs.decoy;
    let oo = expected_rate_bounds(&d.oo, xi, fk)?;
    let s01 = decoy_single_photon_rate(
        src.bob.mu_1,
        src.bob.mu_2,
        expected_rate_bounds(&d.ox, xi, fk)?,
        expected_rate_bounds(&d.oy, xi, fk)?,
        oo,
    );
    let s10 = decoy_single_photon_rate(
        src.alice.mu_1,
        src.alice.mu_2,
        expected_rate_bounds(&d.xo, xi, fk)?,
        expected_rate_bounds(&d.yo, xi, fk)?,
        oo,
    );
    let mut flags = Flags::new();
    let clamp = |s: f64, flags: &mut Flags| {
        if s.is_nan() || s <= 0.0 {
            flags.raise(Flag::VacuousDecoy);
            0.0
        } else {
            s.min(1.0)
        }
    };
    let s01 = clamp(s01, &mut flags);
    let s10 = clamp(s10, &mut flags);
    Ok((s01, s10, flags))
}

/// Intensity-weighted combination of the two untagged counting rates.
pub fn bound_s1(s01: f64, s10: f64, src: &SourceParams) -> f64 {
    let (m1, m1b) = (src.alice.mu_1, src.bob.mu_1);
    m1 / (m1 + m1b) * s10 + m1b / (m1 + m1b) * s01
}

/// Expected untagged Z-window counts `(n01, n10, n1)`.
pub fn bound_untagged_counts(
    s01: f64,
    s10: f64,
    exp: &ExperimentalParams,
    src: &SourceParams,
) -> (f64, f64, f64) {
    let (a, b) = (&src.alice, &src.bob);
    let z = exp.n_pulses * a.p_z * b.p_z;
    let n10 = z * a.epsilon * (1.0 - b.epsilon) * a.mu_z * (-a.mu_z).exp() * s10;
    let n01 = z * b.epsilon * (1.0 - a.epsilon) * b.mu_z * (-b.mu_z).exp() * s01;
    (n01, n10, n01 + n10)
}

/// Upper bound on the phase-flip error rate before pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseErrorBound {
    pub e1ph_upper: f64,
    pub flags: Flags,
}

fn finish_phase_error(
    numerator: f64,
    src: &SourceParams,
    s1_lower: f64,
    mut flags: Flags,
) -> PhaseErrorBound {
    let weight = (-src.alice.mu_1 - src.bob.mu_1).exp();
    let denominator = weight * (src.alice.mu_1 + src.bob.mu_1) * s1_lower;
    let e1ph_upper = if s1_lower <= 0.0 {
        flags.raise(Flag::VacuousPhaseError);
        1.0
    } else {
        (numerator / denominator).clamp(0.0, 1.0)
    };
    if e1ph_upper > 0.5 {
        flags.raise(Flag::VacuousPhaseError);
    }
    PhaseErrorBound { e1ph_upper, flags }
}

/// Method A: Chernoff bounds on `T_X1` (upper) and `S_oo'` (lower) separately.
pub fn bound_e1ph_chernoff(
    obs: &ObservedStats,
    src: &SourceParams,
    s1_lower: f64,
    budget: &SecurityBudget,
) -> Result<PhaseErrorBound> {
    let xi = budget.xi_e1;
    let x1 = SourceCount {
        pulses: obs.x1.pulses,
        clicks: obs.x1.errors,
    };
    let (_, t_upper) = expected_rate_bounds(&x1, xi, budget.finite_key)?;
    let (s_oo_lower, _) = expected_rate_bounds(&obs.decoy.oo, xi, budget.finite_key)?;
    let weight = (-src.alice.mu_1 - src.bob.mu_1).exp();
    let numerator = t_upper - weight * s_oo_lower / 2.0;
    Ok(finish_phase_error(numerator, src, s1_lower, Flags::new()))
}

/// Method B: bounded-difference deviation on the observed numerator.
pub fn bound_e1ph_mcdiarmid(
    obs: &ObservedStats,
    src: &SourceParams,
    s1_lower: f64,
    budget: &SecurityBudget,
) -> Result<PhaseErrorBound> {
    let mut flags = Flags::new();
    let weight = (-src.alice.mu_1 - src.bob.mu_1).exp();
    let observed = obs.x1.rate - weight * obs.decoy.oo.rate() / 2.0;
    let delta = if !budget.finite_key {
        0.0
    } else if obs.x1.pulses <= 0.0 || obs.decoy.oo.pulses <= 0.0 {
        flags.raise(Flag::DegenerateMcDiarmid);
        flags.raise(Flag::VacuousPhaseError);
        return Ok(PhaseErrorBound {
            e1ph_upper: 1.0,
            flags,
        });
    } else {
        let d = mcdiarmid_delta(
            obs.x1.pulses,
            obs.decoy.oo.pulses,
            obs.x1.errors + obs.decoy.oo.clicks,
            src.alice.mu_1,
            src.bob.mu_1,
            budget.xi_mcdiarmid,
        )?;
        if d.degenerate {
            flags.raise(Flag::DegenerateMcDiarmid);
        }
        d.delta
    };
    Ok(finish_phase_error(observed + delta, src, s1_lower, flags))
}

/// A method for upper-bounding the phase-flip error rate of untagged events.
pub trait PhaseErrorEstimator: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn estimate(
        &self,
        obs: &ObservedStats,
        src: &SourceParams,
        s1_lower: f64,
        budget: &SecurityBudget,
    ) -> Result<PhaseErrorBound>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChernoffEstimator;

impl PhaseErrorEstimator for ChernoffEstimator {
    fn name(&self) -> &'static str {
        "A"
    }

    fn description(&self) -> &'static str {
        "two Chernoff bounds on the numerator terms"
    }

    fn estimate(
        &self,
        obs: &ObservedStats,
        src: &SourceParams,
        s1_lower: f64,
        budget: &SecurityBudget,
    ) -> Result<PhaseErrorBound> {
        bound_e1ph_chernoff(obs, src, s1_lower, budget)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct McDiarmidEstimator;

impl PhaseErrorEstimator for McDiarmidEstimator {
    fn name(&self) -> &'static str {
        "B"
    }

    fn description(&self) -> &'static str {
        "bounded-difference bound on the whole numerator"
    }

    fn estimate(
        &self,
        obs: &ObservedStats,
        src: &SourceParams,
        s1_lower: f64,
        budget: &SecurityBudget,
    ) -> Result<PhaseErrorBound> {
        bound_e1ph_mcdiarmid(obs, src, s1_lower, budget)
    }
}

/// All untagged-event bounds for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct UntaggedBounds {
    pub s01_lower: f64,
    pub s10_lower: f64,
    pub s1_lower: f64,
    pub n01_lower: f64,
    pub n10_lower: f64,
    pub n1_lower: f64,
    pub e1ph_upper: f64,
    /// Name of the estimator that produced `e1ph_upper`.
    pub method: &'static str,
    pub flags: Flags,
}

/// Runs the decoy bounds and the given phase-error estimator.
pub fn estimate_untagged(
    exp: &ExperimentalParams,
    obs: &ObservedStats,
    src: &SourceParams,
    budget: &SecurityBudget,
    estimator: &dyn PhaseErrorEstimator,
) -> Result<UntaggedBounds> {
    let (s01, s10, mut flags) = bound_s01_s10(obs, src, budget)?;
    let s1 = bound_s1(s01, s10, src);
    let (n01, n10, n1) = bound_untagged_counts(s01, s10, exp, src);
    let phase = estimator.estimate(obs, src, s1, budget)?;
    flags.extend(&phase.flags);
    Ok(UntaggedBounds {
        s01_lower: s01,
        s10_lower: s10,
        s1_lower: s1,
        n01_lower: n01,
        n10_lower: n10,
        n1_lower: n1,
        e1ph_upper: phase.e1ph_upper,
        method: estimator.name(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{DecoyObservables, ObservedStats, XWindowErrors};
    use crate::params::PartySource;
    use approx::assert_relative_eq;

    fn uniform_obs(rate: f64, pulses: f64) -> ObservedStats {
        let c = SourceCount {
            pulses,
            clicks: rate * pulses,
        };
        ObservedStats {
            decoy: DecoyObservables {
                oo: c,
                ox: c,
                xo: c,
                oy: c,
                yo: c,
            },
            ..Default::default()
        }
    }

    #[test]
    fn equal_rates_give_closed_form() {
        let src = SourceParams::symmetric(PartySource::default());
        let budget = SecurityBudget {
            finite_key: false,
            ..Default::default()
        };
        let s = 1e-5;
        let (s01, s10, _) = bound_s01_s10(&uniform_obs(s, 1e10), &src, &budget).unwrap();
        let (m1, m2) = (src.bob.mu_1, src.bob.mu_2);
        let expect = s * (m2 * m2 * m1.exp() - m1 * m1 * m2.exp() - m2 * m2 + m1 * m1)
            / (m2 * m1 * (m2 - m1));
        assert_relative_eq!(s01, expect, max_relative = 1e-12);
        assert_eq!(s01, s10);
    }

    #[test]
    fn s1_combination() {
        let mut src = SourceParams::symmetric(PartySource::default());
        assert_relative_eq!(bound_s1(0.02, 0.01, &src), 0.015, max_relative = 1e-15);
        assert_eq!(bound_s1(0.3, 0.3, &src), 0.3);
        src.alice.mu_1 = 0.1;
        src.bob.mu_1 = 0.2;
        assert_relative_eq!(
            bound_s1(0.02, 0.01, &src),
            0.016_666_666_666_666_67,
            max_relative = 1e-14
        );
    }

    #[test]
    fn untagged_counts_formula() {
        let mut exp = ExperimentalParams::baseline(0.0);
        exp.n_pulses = 1e12;
        let src = SourceParams::symmetric(PartySource {
            p_z: 0.5,
            epsilon: 0.1,
            mu_z: 0.5,
            ..Default::default()
        });
        let (n01, n10, n1) = bound_untagged_counts(0.0, 1e-5, &exp, &src);
        assert_eq!(n01, 0.0);
        assert_relative_eq!(n10, 6.823_469_921_767_127e4, max_relative = 1e-10);
        assert_eq!(n1, n10);
        let (a, b, _) = bound_untagged_counts(2e-5, 2e-5, &exp, &src);
        assert_eq!(a, b);
    }

    #[test]
    fn negative_numerator_clamps_to_zero() {
        let src = SourceParams::symmetric(PartySource::default());
        let mut obs = uniform_obs(1e-5, 1e10);
        obs.x1 = XWindowErrors {
            pulses: 1e9,
            errors: 0.0,
            rate: 0.0,
        };
        let budget = SecurityBudget {
            finite_key: false,
            ..Default::default()
        };
        let b = bound_e1ph_chernoff(&obs, &src, 1e-3, &budget).unwrap();
        assert_eq!(b.e1ph_upper, 0.0);
        let b = bound_e1ph_mcdiarmid(&obs, &src, 1e-3, &budget).unwrap();
        assert_eq!(b.e1ph_upper, 0.0);
    }

    #[test]
    fn zero_s1_is_vacuous() {
        let src = SourceParams::symmetric(PartySource::default());
        let obs = uniform_obs(1e-5, 1e10);
        let b = bound_e1ph_chernoff(&obs, &src, 0.0, &SecurityBudget::default()).unwrap();
        assert!(b.flags.contains(Flag::VacuousPhaseError));
    }

    #[test]
    fn mcdiarmid_with_unit_failure_prob_is_raw_estimate() {
        let src = SourceParams::symmetric(PartySource::default());
        let mut obs = uniform_obs(2e-8, 1e10);
        obs.x1 = XWindowErrors {
            pulses: 1e9,
            errors: 5000.0,
            rate: 5e-6,
        };
        let budget = SecurityBudget {
            xi_mcdiarmid: 1.0,
            ..Default::default()
        };
        let s1 = 1e-3;
        let b = bound_e1ph_mcdiarmid(&obs, &src, s1, &budget).unwrap();
        let w = (-0.2f64).exp();
        let raw = (5e-6 - w * 2e-8 / 2.0) / (w * 0.2 * s1);
        assert_relative_eq!(b.e1ph_upper, raw, max_relative = 1e-12);
    }

    #[test]
    fn mcdiarmid_with_empty_vacuum_window() {
        let src = SourceParams::symmetric(PartySource::default());
        let mut obs = uniform_obs(0.0, 1e10);
        obs.x1 = XWindowErrors {
            pulses: 1e9,
            errors: 5000.0,
            rate: 5e-6,
        };
        let b = bound_e1ph_mcdiarmid(&obs, &src, 1e-3, &SecurityBudget::default()).unwrap();
        assert!(b.e1ph_upper.is_finite() && b.e1ph_upper > 0.0);
    }
}
