//! Bounds on the phase-flip errors that survive active odd-parity pairing.
//!
//! Untagged bits are modelled as drawn without replacement from the pairing
//! pool. The chain runs: pair counts `n` and `k`, the de Finetti remainder
//! `r`, the pre-pairing error count `M`, the per-pair error rate `e_tau`, and
//! finally the surviving error count `M_s` over the untagged survivors `n1'`.
//!
//! Two tail strategies implement [`TailBound`]: a Gaussian quantile
//! approximation and an exact binomial inversion.

use crate::budget::SecurityBudget;
use crate::channel::ObservedStats;
use crate::error::{Error, Result};
use crate::flags::{Flag, Flags};
use crate::stats::{invert_tail_for_m, invert_tail_for_p, observed_lower, observed_upper};

/// `u = n_g / n_odd`, the fraction of pairs kept per half.
pub fn u_factor(n_g: f64, n_odd: f64) -> Result<f64> {
    if !(n_odd > 0.0) {
        return Err(Error::invalid("n_odd", "must be positive"));
    }
    if !(n_g >= 0.0) {
        return Err(Error::invalid("n_g", "must be non-negative"));
    }
    Ok(n_g / n_odd)
}

fn lower_count(expected: f64, budget: &SecurityBudget) -> Result<f64> {
    if !budget.finite_key {
        return Ok(expected.max(0.0).floor());
    }
    Ok(observed_lower(expected.max(0.0), budget.xi_default)?.floor())
}

/// Pairs with two untagged bits (`n`) and with one (`k`).
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    pub n: f64,
    pub k: f64,
    pub flags: Flags,
}

/// Lower bounds on `n` and `k`. `k` is raised to 1 when it would be zero.
pub fn compute_pair_counts(
    n1_lower: f64,
    n_t: f64,
    u: f64,
    budget: &SecurityBudget,
) -> Result<PairCounts> {
    if !(n_t > 0.0) {
        return Err(Error::invalid("n_t", "must be positive"));
    }
    if !(n1_lower > 0.0 && n1_lower <= n_t) {
        return Err(Error::invalid(
            "n1_lower",
            format!("{n1_lower} is not in (0, n_t]"),
        ));
    }
    let frac = n1_lower / n_t;
    let n = lower_count(frac * frac * u * n_t / 2.0, budget)?;
    let mut k = lower_count(u * n1_lower - frac * frac * u * n_t, budget)?;
    let mut flags = Flags::new();
    if k <= 0.0 {
        k = 1.0;
        flags.raise(Flag::KFloored);
    }
    Ok(PairCounts { n, k, flags })
}

/// Remainder `r` making the de Finetti distance `3 k^2 exp(-r k / (2n + k))`
/// equal `eps_def`.
pub fn compute_r(n: f64, k: f64, eps_def: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid("k", "must be positive"));
    }
    if !(n >= 0.0) {
        return Err(Error::invalid("n", "must be non-negative"));
    }
    if !(eps_def > 0.0) {
        return Err(Error::invalid("eps_def", "must be positive"));
    }
    let log_term = (3.0 * k * k / eps_def).ln();
    Ok(((2.0 * n + k) / k * log_term).max(0.0))
}

/// `3 k^2 exp(-r k / (2n + k))`.
pub fn definetti_distance(n: f64, k: f64, r: f64) -> f64 {
    3.0 * k * k * (-r * k / (2.0 * n + k)).exp()
}

/// Upper bound on the phase-flip errors among the `2n` bits of the pairs.
pub fn compute_m_bar(n: f64, e1ph_upper: f64, budget: &SecurityBudget) -> Result<f64> {
    let expected = 2.0 * n * e1ph_upper;
    if !budget.finite_key {
        return Ok(expected.ceil());
    }
    Ok(observed_upper(expected, budget.xi_e1)?.ceil())
}

/// Per-pair error rate and surviving error count from one tail strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivorErrors {
    pub e_tau: f64,
    /// `E_tau = e_tau (1 - e_tau)`, the odd-parity probability of a pair.
    pub big_e_tau: f64,
    /// Upper bound on surviving phase-flip errors, including the remainder.
    pub m_bar_s: f64,
    pub flags: Flags,
}

/// Converts `M` into the surviving error count.
///
/// `r` is the integer remainder and satisfies `r < n`.
pub trait TailBound: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn survivors(
        &self,
        n: f64,
        r: f64,
        m_bar: f64,
        budget: &SecurityBudget,
    ) -> Result<SurvivorErrors>;
}

fn pair_flags(e_tau: f64) -> Flags {
    let mut flags = Flags::new();
    if e_tau > 0.5 {
        flags.raise(Flag::ETauAboveHalf);
    }
    flags
}

fn check_remainder(n: f64, r: f64) -> Result<()> {
    if !(r >= 0.0 && r < n) {
        return Err(Error::invalid("r", format!("{r} is not in [0, n = {n})")));
    }
    Ok(())
}

/// Normal-quantile approximation at the 0.99 level for the pre-pairing draw and
/// at roughly `1e-10` for the survivors.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianApprox;

impl GaussianApprox {
    /// Standard-normal quantile for the pre-pairing draw.
    pub const Z_TAU: f64 = 2.33;
    /// Standard-normal quantile for the surviving errors.
    pub const Z_TAU_TILDE: f64 = 6.36;
}

impl TailBound for GaussianApprox {
    fn name(&self) -> &'static str {
        "approx"
    }

    fn description(&self) -> &'static str {
        "Gaussian quantiles"
    }

    fn survivors(
        &self,
        n: f64,
        r: f64,
        m_bar: f64,
        budget: &SecurityBudget,
    ) -> Result<SurvivorErrors> {
        check_remainder(n, r)?;
        let (z1, z2) = if budget.finite_key {
            (Self::Z_TAU, Self::Z_TAU_TILDE)
        } else {
            (0.0, 0.0)
        };
        let e_tau = (m_bar - z1 * m_bar.sqrt()) / (2.0 * n - r);
        if e_tau <= 0.0 {
            let mut flags = Flags::new();
            flags.raise(Flag::ETauNonPositive);
            return Ok(SurvivorErrors {
                e_tau: 0.0,
                big_e_tau: 0.0,
                m_bar_s: r,
                flags,
            });
        }
        let big_e_tau = e_tau * (1.0 - e_tau);
        let mean = (n - r) * big_e_tau;
        Ok(SurvivorErrors {
            e_tau,
            big_e_tau,
            m_bar_s: (mean + z2 * mean.sqrt()).ceil() + r,
            flags: pair_flags(e_tau),
        })
    }
}

/// Exact binomial tail inversion at `xi_tau` and `xi_tau_tilde`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactBinomial;

impl TailBound for ExactBinomial {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn description(&self) -> &'static str {
        "exact binomial tails"
    }

    fn survivors(
        &self,
        n: f64,
        r: f64,
        m_bar: f64,
        budget: &SecurityBudget,
    ) -> Result<SurvivorErrors> {
        check_remainder(n, r)?;
        let draws = (2.0 * n - r) as u64;
        let survivors = (n - r) as u64;
        let threshold = m_bar.max(0.0) as u64;
        if !budget.finite_key {
            let e_tau = (m_bar / (2.0 * n - r)).min(1.0);
            let big_e_tau = e_tau * (1.0 - e_tau);
            return Ok(SurvivorErrors {
                e_tau,
                big_e_tau,
                m_bar_s: ((n - r) * big_e_tau).ceil() + r,
                flags: pair_flags(e_tau),
            });
        }
        if threshold == 0 {
            let mut flags = Flags::new();
            flags.raise(Flag::ETauNonPositive);
            return Ok(SurvivorErrors {
                e_tau: 0.0,
                big_e_tau: 0.0,
                m_bar_s: r,
                flags,
            });
        }
        if threshold > draws {
            let mut flags = Flags::new();
            flags.raise(Flag::ETauAboveHalf);
            return Ok(SurvivorErrors {
                e_tau: 1.0,
                big_e_tau: 0.0,
                m_bar_s: (n - r) + r,
                flags,
            });
        }
        let e_tau = invert_tail_for_p(draws, threshold, budget.xi_tau)?;
        let big_e_tau = e_tau * (1.0 - e_tau);
        let tail = if survivors == 0 {
            0
        } else {
            invert_tail_for_m(survivors, big_e_tau, budget.xi_tau_tilde)?
        };
        Ok(SurvivorErrors {
            e_tau,
            big_e_tau,
            m_bar_s: tail as f64 + r,
            flags: pair_flags(e_tau),
        })
    }
}

/// Lower bound on untagged bits kept after pairing.
pub fn compute_n1_prime(
    n01_lower: f64,
    n10_lower: f64,
    n_t: f64,
    u: f64,
    budget: &SecurityBudget,
) -> Result<f64> {
    if !(n_t > 0.0) {
        return Err(Error::invalid("n_t", "must be positive"));
    }
    lower_count(n01_lower / n_t * n10_lower / n_t * u * n_t, budget)
}

/// `(min(M_s / n1', 1), eps_s)`. The rate is 1 when there are no survivors.
pub fn phase_error_rate_after_oper(
    m_bar_s: f64,
    n1_prime: f64,
    budget: &SecurityBudget,
) -> (f64, f64) {
    let rate = if n1_prime <= 0.0 {
        1.0
    } else {
        (m_bar_s / n1_prime).min(1.0)
    };
    (rate, budget.eps_s())
}

/// Every intermediate of the pairing chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZigzagResult {
    pub u: f64,
    pub n: f64,
    pub k: f64,
    /// Remainder rounded up to an integer.
    pub r: f64,
    pub m_bar: f64,
    pub e_tau: f64,
    pub big_e_tau: f64,
    pub m_bar_s: f64,
    pub n1_prime: f64,
    pub e1ph_prime: f64,
    /// Failure probability of `e1ph_prime`.
    pub eps_s: f64,
    /// Name of the tail strategy used.
    pub mode: &'static str,
    pub flags: Flags,
}

/// Runs the chain from the decoy bounds to `e1ph'`.
///
/// Stops early with `e1ph' = 1` once a flag makes the rate zero.
pub fn run_zigzag(
    obs: &ObservedStats,
    n01_lower: f64,
    n10_lower: f64,
    e1ph_upper: f64,
    budget: &SecurityBudget,
    tail: &dyn TailBound,
) -> Result<ZigzagResult> {
    let mut out = ZigzagResult {
        mode: tail.name(),
        e1ph_prime: 1.0,
        eps_s: budget.eps_s(),
        ..Default::default()
    };
    let n_t = obs.n_t();
    if !(obs.aopp.n_odd > 0.0) || !(n_t > 0.0) {
        out.flags.raise(Flag::DegeneratePairing);
        return Ok(out);
    }
    out.u = u_factor(obs.aopp.n_g, obs.aopp.n_odd)?;
    let n1_lower = (n01_lower + n10_lower).min(n_t);
    if n1_lower <= 0.0 {
        out.flags.raise(Flag::ZeroSurvivors);
        return Ok(out);
    }
    let pairs = compute_pair_counts(n1_lower, n_t, out.u, budget)?;
    out.n = pairs.n;
    out.k = pairs.k;
    out.flags.extend(&pairs.flags);
    out.r = compute_r(pairs.n, pairs.k, budget.eps_def)?.ceil();
    if out.r >= out.n {
        out.flags.raise(Flag::RemainderTooLarge);
        return Ok(out);
    }
    out.m_bar = compute_m_bar(out.n, e1ph_upper, budget)?;
    let s = tail.survivors(out.n, out.r, out.m_bar, budget)?;
    out.e_tau = s.e_tau;
    out.big_e_tau = s.big_e_tau;
    out.m_bar_s = s.m_bar_s;
    out.flags.extend(&s.flags);
    out.n1_prime = compute_n1_prime(n01_lower, n10_lower, n_t, out.u, budget)?;
    if out.n1_prime <= 0.0 {
        out.flags.raise(Flag::ZeroSurvivors);
    }
    out.e1ph_prime = phase_error_rate_after_oper(out.m_bar_s, out.n1_prime, budget).0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn asymptotic() -> SecurityBudget {
        SecurityBudget {
            finite_key: false,
            ..Default::default()
        }
    }

    #[test]
    fn u_factor_rejects_empty_pool() {
        assert!(u_factor(10.0, 0.0).is_err());
        assert_eq!(u_factor(5.0, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn identity_pair_counts() {
        let p = compute_pair_counts(1e6, 1e6, 1.0, &asymptotic()).unwrap();
        assert_eq!(p.n, 5e5);
        assert_eq!(p.k, 1.0);
        assert!(p.flags.contains(Flag::KFloored));
    }

    #[test]
    fn pair_counts_reject_bad_input() {
        let b = SecurityBudget::default();
        assert!(compute_pair_counts(0.0, 1e6, 1.0, &b).is_err());
        assert!(compute_pair_counts(2e6, 1e6, 1.0, &b).is_err());
        assert!(compute_pair_counts(1.0, 0.0, 1.0, &b).is_err());
    }

    #[test]
    fn r_meets_target_distance() {
        for &(n, k) in &[(1e6, 1e4), (5e3, 1.0), (1e8, 3e7)] {
            let r = compute_r(n, k, 1e-13).unwrap();
            assert_relative_eq!(definetti_distance(n, k, r), 1e-13, max_relative = 1e-9);
        }
    }

    #[test]
    fn r_reference_value() {
        let r = compute_r(1e6, 1e4, 1e-13).unwrap();
        assert_relative_eq!(r, 201.0 * (3e21f64).ln(), max_relative = 1e-14);
    }

    #[test]
    fn m_bar_is_an_integer_above_the_mean() {
        let m = compute_m_bar(1e6, 5e-3, &SecurityBudget::default()).unwrap();
        assert_eq!(m, m.floor());
        assert!(m > 1e4);
        assert_eq!(compute_m_bar(1e6, 5e-3, &asymptotic()).unwrap(), 1e4);
    }

    #[test]
    fn approx_non_positive_e_tau() {
        let s = GaussianApprox
            .survivors(1e3, 10.0, 4.0, &SecurityBudget::default())
            .unwrap();
        assert!(s.flags.contains(Flag::ETauNonPositive));
        assert_eq!(s.m_bar_s, 10.0);
    }

    #[test]
    fn exact_brackets_approx_at_large_n() {
        let b = SecurityBudget::default();
        let (n, r, m) = (1e6, 1e4, 10_000.0);
        let a = GaussianApprox.survivors(n, r, m, &b).unwrap();
        let e = ExactBinomial.survivors(n, r, m, &b).unwrap();
        assert_relative_eq!(a.e_tau, e.e_tau, max_relative = 0.01);
        assert_relative_eq!(a.m_bar_s, e.m_bar_s, max_relative = 0.01);
    }

    #[test]
    fn exact_handles_threshold_beyond_draws() {
        let s = ExactBinomial
            .survivors(10.0, 1.0, 50.0, &SecurityBudget::default())
            .unwrap();
        assert!(s.flags.contains(Flag::ETauAboveHalf));
    }

    #[test]
    fn remainder_must_be_below_n() {
        assert!(GaussianApprox
            .survivors(10.0, 10.0, 5.0, &SecurityBudget::default())
            .is_err());
        assert!(ExactBinomial
            .survivors(10.0, 12.0, 5.0, &SecurityBudget::default())
            .is_err());
    }

    #[test]
    fn after_oper_rate_is_capped() {
        let b = SecurityBudget::default();
        assert_eq!(phase_error_rate_after_oper(10.0, 5.0, &b).0, 1.0);
        assert_eq!(phase_error_rate_after_oper(10.0, 0.0, &b).0, 1.0);
        assert_eq!(phase_error_rate_after_oper(0.0, 100.0, &b).0, 0.0);
        let (rate, eps_s) = phase_error_rate_after_oper(10.0, 100.0, &b);
        assert_eq!(rate, 0.1);
        assert_eq!(eps_s, b.eps_s());
    }
}
