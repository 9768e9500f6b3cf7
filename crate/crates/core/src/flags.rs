use std::fmt;

/// Non-fatal conditions raised while evaluating a configuration.
///
/// A flag never aborts the pipeline. Flags that make a bound vacuous force the
/// final key rate to zero, see [`Flag::forces_zero_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    /// A decoy source received fewer than one pulse pair.
    DegenerateWindow,
    /// `M_slices = 1`, so the phase post-selection accepts every X window.
    NoPhaseSelection,
    /// A decoy lower bound on an untagged counting rate was not positive.
    VacuousDecoy,
    /// The phase-flip error bound before pairing exceeded one half.
    VacuousPhaseError,
    /// No events entered the McDiarmid estimate (`n_T = 0`).
    DegenerateMcDiarmid,
    /// The neglected-bit count `k` was not positive and was floored to 1.
    KFloored,
    /// The de Finetti remainder `r` is not smaller than the pair count `n`.
    RemainderTooLarge,
    /// The inferred per-pair error probability was not positive.
    ETauNonPositive,
    /// The inferred per-pair error probability exceeded one half.
    ETauAboveHalf,
    /// No untagged bit survives the parity check.
    ZeroSurvivors,
    /// Z windows produced no usable pairing statistics.
    DegeneratePairing,
    /// No point of an optimization search produced a positive rate.
    NoKeyFound,
}

impl Flag {
    pub fn forces_zero_rate(self) -> bool {
        matches!(
            self,
            Flag::VacuousDecoy
                | Flag::VacuousPhaseError
                | Flag::RemainderTooLarge
                | Flag::ETauAboveHalf
                | Flag::ZeroSurvivors
                | Flag::DegeneratePairing
                | Flag::NoKeyFound
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::DegenerateWindow => "degenerate-window",
            Flag::NoPhaseSelection => "no-phase-selection",
            Flag::VacuousDecoy => "vacuous-decoy",
            Flag::VacuousPhaseError => "vacuous-phase-error",
            Flag::DegenerateMcDiarmid => "degenerate-mcdiarmid",
            Flag::KFloored => "k-floored",
            Flag::RemainderTooLarge => "remainder-too-large",
            Flag::ETauNonPositive => "e-tau-non-positive",
            Flag::ETauAboveHalf => "e-tau-above-half",
            Flag::ZeroSurvivors => "zero-survivors",
            Flag::DegeneratePairing => "degenerate-pairing",
            Flag::NoKeyFound => "no-key-found",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered, de-duplicated set of flags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Flags(Vec<Flag>);

impl Flags {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raise(&mut self, flag: Flag) {
        if let Err(pos) = self.0.binary_search(&flag) {
            self.0.insert(pos, flag);
        }
    }

    pub fn extend(&mut self, other: &Flags) {
        for &flag in &other.0 {
            self.raise(flag);
        }
    }

    pub fn contains(&self, flag: Flag) -> bool {
        self.0.binary_search(&flag).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Flag> + '_ {
        self.0.iter().copied()
    }

    pub fn forces_zero_rate(&self) -> bool {
        self.0.iter().any(|f| f.forces_zero_rate())
    }
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        for (i, flag) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{flag}")?;
        }
        Ok(())
    }
}
