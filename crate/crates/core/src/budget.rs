//! Failure-probability ledger.

use crate::error::{check_probability, Result};

/// Every failure probability used by the pipeline, with the derived totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBudget {
    /// Chernoff failure probability for every use not listed below.
    pub xi_default: f64,
    /// Chernoff failure probability in the phase-error numerator and for `M`.
    pub xi_e1: f64,
    /// Failure probability of the bounded-difference (method B) numerator.
    pub xi_mcdiarmid: f64,
    /// Target trace distance of the de Finetti approximation.
    pub eps_def: f64,
    pub xi_tau: f64,
    pub xi_tau_tilde: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub eps_hat: f64,
    pub eps_n1_prime: f64,
    pub eps_nk: f64,
    /// When false every Chernoff substitution is the identity (asymptotic limit).
    pub finite_key: bool,
}

impl Default for SecurityBudget {
    fn default() -> Self {
        Self {
            xi_default: 1e-10,
            xi_e1: 1e-13,
            xi_mcdiarmid: 1e-13,
            eps_def: 1e-13,
            xi_tau: 1e-2,
            xi_tau_tilde: 1e-10,
            eps_cor: 1e-10,
            eps_pa: 1e-10,
            eps_hat: 1e-10,
            eps_n1_prime: 6e-10,
            eps_nk: 2e-10,
            finite_key: true,
        }
    }
}

/// Optional replacements for [`SecurityBudget`] defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BudgetOverrides {
    pub xi_default: Option<f64>,
    pub xi_e1: Option<f64>,
    pub xi_mcdiarmid: Option<f64>,
    pub eps_def: Option<f64>,
    pub xi_tau: Option<f64>,
    pub xi_tau_tilde: Option<f64>,
    pub eps_cor: Option<f64>,
    pub eps_pa: Option<f64>,
    pub eps_hat: Option<f64>,
    pub eps_n1_prime: Option<f64>,
    pub eps_nk: Option<f64>,
}

/// Defaults with `overrides` applied. Values must lie in `[0, 1]`.
pub fn security_budget(overrides: &BudgetOverrides) -> Result<SecurityBudget> {
    let d = SecurityBudget::default();
    let pick = |name: &'static str, v: Option<f64>, default: f64| -> Result<f64> {
        match v {
            Some(v) => {
                check_probability(name, v)?;
                Ok(v)
            }
            None => Ok(default),
        }
    };
    Ok(SecurityBudget {
        xi_default: pick("xi_default", overrides.xi_default, d.xi_default)?,
        xi_e1: pick("xi_e1", overrides.xi_e1, d.xi_e1)?,
        xi_mcdiarmid: pick("xi_mcdiarmid", overrides.xi_mcdiarmid, d.xi_mcdiarmid)?,
        eps_def: pick("eps_def", overrides.eps_def, d.eps_def)?,
        xi_tau: pick("xi_tau", overrides.xi_tau, d.xi_tau)?,
        xi_tau_tilde: pick("xi_tau_tilde", overrides.xi_tau_tilde, d.xi_tau_tilde)?,
        eps_cor: pick("eps_cor", overrides.eps_cor, d.eps_cor)?,
        eps_pa: pick("eps_pa", overrides.eps_pa, d.eps_pa)?,
        eps_hat: pick("eps_hat", overrides.eps_hat, d.eps_hat)?,
        eps_n1_prime: pick("eps_n1_prime", overrides.eps_n1_prime, d.eps_n1_prime)?,
        eps_nk: pick("eps_nk", overrides.eps_nk, d.eps_nk)?,
        finite_key: true,
    })
}

impl SecurityBudget {
    /// Budget with every component zero.
    pub fn zero() -> Self {
        Self {
            xi_default: 0.0,
            xi_e1: 0.0,
            xi_mcdiarmid: 0.0,
            eps_def: 0.0,
            xi_tau: 1.0,
            xi_tau_tilde: 0.0,
            eps_cor: 0.0,
            eps_pa: 0.0,
            eps_hat: 0.0,
            eps_n1_prime: 0.0,
            eps_nk: 0.0,
            finite_key: true,
        }
    }

    /// Failure probability of `M`: two Chernoff uses in the phase-error
    /// numerator plus one for `M` itself.
    pub fn eps_e(&self) -> f64 {
        3.0 * self.xi_e1
    }

    /// `xi~ + (eps_e + 2 eps_def) / xi_tau + 2 eps_def`.
    pub fn eps_s(&self) -> f64 {
        self.xi_tau_tilde + (self.eps_e() + 2.0 * self.eps_def) / self.xi_tau + 2.0 * self.eps_def
    }

    /// `2 eps_hat + 4 eps_s + eps_PA + eps_n1' + eps_nk`.
    pub fn eps_sec(&self) -> f64 {
        2.0 * self.eps_hat + 4.0 * self.eps_s() + self.eps_pa + self.eps_n1_prime + self.eps_nk
    }

    pub fn eps_tol(&self) -> f64 {
        self.eps_cor + self.eps_sec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_ledger() {
        let b = security_budget(&BudgetOverrides::default()).unwrap();
        assert_relative_eq!(b.eps_e(), 3e-13, max_relative = 1e-15);
        assert_relative_eq!(b.eps_s(), 1.502e-10, max_relative = 1e-12);
        assert_relative_eq!(b.eps_tol(), 1.8008e-9, max_relative = 1e-12);
    }

    #[test]
    fn zeroed_ledger() {
        assert_eq!(SecurityBudget::zero().eps_tol(), 0.0);
    }

    #[test]
    fn overrides_apply_and_validate() {
        let b = security_budget(&BudgetOverrides {
            xi_default: Some(1.69e-10),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(b.xi_default, 1.69e-10);
        assert!(security_budget(&BudgetOverrides {
            eps_pa: Some(2.0),
            ..Default::default()
        })
        .is_err());
    }
}
