//! Finite-key rates for sending-or-not-sending twin-field QKD with active
//! odd-parity pairing.
//!
//! The pipeline runs [`channel::simulate`] to produce expected observations,
//! bounds untagged events with [`decoy`], carries the phase-error bound through
//! pairing with [`zigzag`] and assembles the rate in [`keyrate`].
//! [`optimizer`] searches source parameters for the best rate.

pub mod budget;
pub mod channel;
pub mod decoy;
pub mod error;
pub mod flags;
pub mod keyrate;
pub mod optimizer;
pub mod params;
pub mod registry;
pub mod special;
pub mod stats;
pub mod zigzag;

pub use budget::{security_budget, BudgetOverrides, SecurityBudget};
pub use error::{Error, Result};
pub use flags::{Flag, Flags};
pub use keyrate::{evaluate, evaluate_with, KeyRateReport};
pub use params::{ExperimentalParams, PartySource, PhaseSelection, SourceParams};
pub use registry::{Method, StrategyRegistry, ZigzagMode};
