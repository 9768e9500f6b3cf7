//! Named strategies selected at run time.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::decoy::{ChernoffEstimator, McDiarmidEstimator, PhaseErrorEstimator};
use crate::error::{Error, Result};
use crate::zigzag::{ExactBinomial, GaussianApprox, TailBound};

/// Phase-error estimator selector for the built-in strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Method {
    #[default]
    A,
    B,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::A, Method::B];

    pub fn name(self) -> &'static str {
        match self {
            Method::A => "A",
            Method::B => "B",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Method::A),
            "B" | "b" => Ok(Method::B),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Tail strategy selector for the built-in strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ZigzagMode {
    #[default]
    Approx,
    Exact,
}

impl ZigzagMode {
    pub fn name(self) -> &'static str {
        match self {
            ZigzagMode::Approx => "approx",
            ZigzagMode::Exact => "exact",
        }
    }
}

impl fmt::Display for ZigzagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZigzagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx" => Ok(ZigzagMode::Approx),
            "exact" => Ok(ZigzagMode::Exact),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Phase-error estimators and tail bounds keyed by name.
#[derive(Default, Clone)]
pub struct StrategyRegistry {
    estimators: BTreeMap<&'static str, Arc<dyn PhaseErrorEstimator>>,
    tails: BTreeMap<&'static str, Arc<dyn TailBound>>,
}

impl StrategyRegistry {
    /// An empty registry.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register_estimator(Arc::new(ChernoffEstimator));
        reg.register_estimator(Arc::new(McDiarmidEstimator));
        reg.register_tail(Arc::new(GaussianApprox));
        reg.register_tail(Arc::new(ExactBinomial));
        reg
    }

    /// Shared registry holding the built-in strategies.
    pub fn global() -> &'static StrategyRegistry {
        static GLOBAL: OnceLock<StrategyRegistry> = OnceLock::new();
        GLOBAL.get_or_init(Self::with_builtins)
    }

    /// Adds or replaces the estimator under its own name.
    pub fn register_estimator(&mut self, estimator: Arc<dyn PhaseErrorEstimator>) {
        self.estimators.insert(estimator.name(), estimator);
    }

    /// Adds or replaces the tail bound under its own name.
    pub fn register_tail(&mut self, tail: Arc<dyn TailBound>) {
        self.tails.insert(tail.name(), tail);
    }

    pub fn estimator(&self, name: &str) -> Result<&dyn PhaseErrorEstimator> {
        self.estimators
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn tail(&self, name: &str) -> Result<&dyn TailBound> {
        self.tails
            .get(name)
            .map(|t| t.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn estimator_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.estimators.keys().copied()
    }

    pub fn tail_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.tails.keys().copied()
    }
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyRegistry")
            .field("estimators", &self.estimators.keys().collect::<Vec<_>>())
            .field("tails", &self.tails.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_registered() {
        let reg = StrategyRegistry::global();
        assert_eq!(reg.estimator_names().collect::<Vec<_>>(), ["A", "B"]);
        assert_eq!(reg.tail_names().collect::<Vec<_>>(), ["approx", "exact"]);
        for m in Method::ALL {
            assert_eq!(reg.estimator(m.name()).unwrap().name(), m.name());
        }
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(StrategyRegistry::new().estimator("A").is_err());
        assert!(StrategyRegistry::global().tail("gauss").is_err());
        assert!("C".parse::<Method>().is_err());
        assert_eq!("exact".parse::<ZigzagMode>().unwrap(), ZigzagMode::Exact);
    }
}
