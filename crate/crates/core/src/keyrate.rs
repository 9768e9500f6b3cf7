//! Final key rate, repeaterless bounds and the full evaluation pipeline.

use crate::budget::SecurityBudget;
use crate::channel::{simulate, ObservedStats};
use crate::decoy::{estimate_untagged, PhaseErrorEstimator, UntaggedBounds};
use crate::error::{Error, Result};
use crate::flags::Flags;
use crate::params::{ExperimentalParams, PartySource, SourceParams};
use crate::registry::{Method, StrategyRegistry, ZigzagMode};
use crate::stats::shannon_entropy;
use crate::zigzag::{run_zigzag, TailBound, ZigzagResult};

/// Largest allowed `|residual|` of the asymmetric constraint for unequal arms.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Binary entropy, saturated at 1 above one half.
fn capped_entropy(x: f64) -> Result<f64> {
    if x >= 0.5 {
        Ok(1.0)
    } else {
        shannon_entropy(x.max(0.0))
    }
}

/// Unclamped key rate per pulse pair. May be negative.
pub fn raw_key_rate(
    n1_prime: f64,
    e1ph_prime: f64,
    n_t_prime: f64,
    e_prime: f64,
    exp: &ExperimentalParams,
    budget: &SecurityBudget,
) -> Result<f64> {
    let privacy = n1_prime * (1.0 - capped_entropy(e1ph_prime)?);
    let correction = exp.f * n_t_prime * capped_entropy(e_prime)?;
    let cor = (2.0 / budget.eps_cor).log2();
    let pa = 2.0 * (1.0 / (std::f64::consts::SQRT_2 * budget.eps_pa * budget.eps_hat)).log2();
    Ok(2.0 / exp.n_pulses * (privacy - correction - cor - pa))
}

/// Key rate per pulse pair, clamped at 0.
pub fn key_rate(
    n1_prime: f64,
    e1ph_prime: f64,
    n_t_prime: f64,
    e_prime: f64,
    exp: &ExperimentalParams,
    budget: &SecurityBudget,
) -> Result<f64> {
    Ok(raw_key_rate(n1_prime, e1ph_prime, n_t_prime, e_prime, exp, budget)?.max(0.0))
}

/// Repeaterless bounds `(absolute, practical)` per pulse at total distance
/// `l_total` km.
pub fn plob_bounds(l_total: f64, alpha_f: f64, eta_d: f64) -> Result<(f64, f64)> {
    if !(l_total >= 0.0) {
        return Err(Error::invalid("l_total", "must be non-negative"));
    }
    let eta = 10f64.powf(-alpha_f * l_total / 10.0);
    Ok((
        -(-eta).ln_1p() / std::f64::consts::LN_2,
        -(-eta_d * eta).ln_1p() / std::f64::consts::LN_2,
    ))
}

fn untagged_weight(p: &PartySource, other: &PartySource) -> f64 {
    p.epsilon * (1.0 - other.epsilon) * p.mu_z * (-p.mu_z).exp()
}

/// `mu_1 / mu_1' - eps (1 - eps') mu_z e^-mu_z / (eps' (1 - eps) mu_z' e^-mu_z')`.
///
/// Zero when both parties contribute untagged bits at the rate their weak
/// decoys are calibrated to.
pub fn asymmetric_constraint_residual(src: &SourceParams) -> f64 {
    src.alice.mu_1 / src.bob.mu_1
        - untagged_weight(&src.alice, &src.bob) / untagged_weight(&src.bob, &src.alice)
}

/// The `mu_1'` that zeroes [`asymmetric_constraint_residual`], all other
/// fields held fixed. The residual is monotone in `mu_1'` so the root is
/// unique.
pub fn solve_mu1_bob(src: &SourceParams) -> f64 {
    src.alice.mu_1 * untagged_weight(&src.bob, &src.alice) / untagged_weight(&src.alice, &src.bob)
}

/// Everything computed for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    pub untagged: UntaggedBounds,
    pub zigzag: ZigzagResult,
    pub n_t: f64,
    pub n_t_prime: f64,
    pub e_prime: f64,
    /// Key rate per pulse pair, 0 when any flag forbids a key.
    pub rate: f64,
    /// Unclamped rate, used as a smooth objective.
    pub raw_rate: f64,
    pub plob1: f64,
    pub plob2: f64,
    pub flags: Flags,
}

impl KeyRateReport {
    pub fn ratio1(&self) -> Option<f64> {
        (self.plob1 > 0.0).then(|| self.rate / self.plob1)
    }

    pub fn ratio2(&self) -> Option<f64> {
        (self.plob2 > 0.0).then(|| self.rate / self.plob2)
    }

    pub fn secure(&self) -> bool {
        self.rate > 0.0
    }
}

fn check_inputs(exp: &ExperimentalParams, src: &SourceParams) -> Result<()> {
    exp.validate()?;
    src.validate()?;
    if !exp.is_symmetric() {
        let residual = asymmetric_constraint_residual(src);
        if !(residual.abs() < CONSTRAINT_TOLERANCE) {
            return Err(Error::invalid(
                "mu_1_b",
                format!(
                    "asymmetric constraint residual {residual:e} exceeds {CONSTRAINT_TOLERANCE:e}"
                ),
            ));
        }
    }
    Ok(())
}

/// Runs the pipeline on expected-value statistics with named strategies from
/// the global registry.
pub fn evaluate(
    exp: &ExperimentalParams,
    src: &SourceParams,
    budget: &SecurityBudget,
    method: Method,
    mode: ZigzagMode,
) -> Result<KeyRateReport> {
    let reg = StrategyRegistry::global();
    evaluate_with(
        exp,
        src,
        budget,
        reg.estimator(method.name())?,
        reg.tail(mode.name())?,
    )
}

/// Runs the pipeline on expected-value statistics.
pub fn evaluate_with(
    exp: &ExperimentalParams,
    src: &SourceParams,
    budget: &SecurityBudget,
    estimator: &dyn PhaseErrorEstimator,
    tail: &dyn TailBound,
) -> Result<KeyRateReport> {
    check_inputs(exp, src)?;
    let obs = simulate(exp, src);
    evaluate_observed(exp, &obs, src, budget, estimator, tail)
}

/// Runs the estimators on given statistics, e.g. sampled ones.
pub fn evaluate_observed(
    exp: &ExperimentalParams,
    obs: &ObservedStats,
    src: &SourceParams,
    budget: &SecurityBudget,
    estimator: &dyn PhaseErrorEstimator,
    tail: &dyn TailBound,
) -> Result<KeyRateReport> {
    let mut flags = obs.flags.clone();
    let untagged = estimate_untagged(exp, obs, src, budget, estimator)?;
    flags.extend(&untagged.flags);
    let zigzag = run_zigzag(
        obs,
        untagged.n01_lower,
        untagged.n10_lower,
        untagged.e1ph_upper,
        budget,
        tail,
    )?;
    flags.extend(&zigzag.flags);
    let n_t_prime = obs.aopp.n_t_prime;
    let e_prime = obs.aopp.e_prime;
    let raw_rate = raw_key_rate(
        zigzag.n1_prime,
        zigzag.e1ph_prime,
        n_t_prime,
        e_prime,
        exp,
        budget,
    )?;
    let rate = if flags.forces_zero_rate() {
        0.0
    } else {
        raw_rate.max(0.0)
    };
    let (plob1, plob2) = plob_bounds(exp.total_distance(), exp.alpha_f, exp.eta_d)?;
    Ok(KeyRateReport {
        untagged,
        zigzag,
        n_t: obs.n_t(),
        n_t_prime,
        e_prime,
        rate,
        raw_rate,
        plob1,
        plob2,
        flags,
    })
}
