//! Hardware, channel and source parameters.

use crate::error::{check_non_negative, check_probability, Error, Result};

/// How X windows are post-selected on the phase difference of the two pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseSelection {
    /// Accept phase differences within `pi / M_slices` of aligned or anti-aligned.
    #[default]
    Sliced,
    /// Accept the same fraction `2 / M_slices` but treat every accepted pair as
    /// perfectly aligned.
    Ideal,
}

/// Hardware and channel constants of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentalParams {
    /// Dark-count probability per pulse per detector.
    pub p_d: f64,
    /// Misalignment error probability.
    pub e_d: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Error-correction inefficiency.
    pub f: f64,
    /// Fiber loss in dB/km.
    pub alpha_f: f64,
    /// Total number of pulse pairs.
    pub n_pulses: f64,
    /// Alice-to-Charlie distance in km.
    pub l_a: f64,
    /// Bob-to-Charlie distance in km.
    pub l_b: f64,
    /// Number of phase slices used by the X-window post-selection.
    pub m_slices: u32,
    pub phase_selection: PhaseSelection,
}

impl ExperimentalParams {
    /// Dark count 1e-8, misalignment 3%, efficiency 30%, f = 1.1, 0.2 dB/km,
    /// 1e12 pulses, symmetric arms of `total_km / 2`.
    pub fn baseline(total_km: f64) -> Self {
        Self {
            p_d: 1.0e-8,
            e_d: 0.03,
            eta_d: 0.30,
            f: 1.1,
            alpha_f: 0.2,
            n_pulses: 1e12,
            l_a: total_km / 2.0,
            l_b: total_km / 2.0,
            m_slices: 16,
            phase_selection: PhaseSelection::Sliced,
        }
    }

    /// Device set of the 402 km field comparison.
    pub fn field_402() -> Self {
        Self {
            p_d: 3.36e-8,
            e_d: 0.07,
            eta_d: 0.20,
            alpha_f: 0.185,
            n_pulses: 2e13,
            ..Self::baseline(402.0)
        }
    }

    /// Device set of the 502 km field comparison.
    pub fn field_502() -> Self {
        Self {
            p_d: 1.26e-8,
            e_d: 0.098,
            eta_d: 0.29,
            alpha_f: 0.162,
            n_pulses: 2e13,
            ..Self::baseline(502.0)
        }
    }

    pub fn total_distance(&self) -> f64 {
        self.l_a + self.l_b
    }

    /// Splits `total_km` so that `l_a - l_b = offset_km`.
    pub fn with_distance(mut self, total_km: f64, offset_km: f64) -> Self {
        self.l_a = (total_km + offset_km) / 2.0;
        self.l_b = (total_km - offset_km) / 2.0;
        self
    }

    pub fn is_symmetric(&self) -> bool {
        self.l_a == self.l_b
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_d", self.p_d)?;
        check_probability("e_d", self.e_d)?;
        check_probability("eta_d", self.eta_d)?;
        if !(self.f.is_finite() && self.f >= 1.0) {
            return Err(Error::invalid("f", format!("{} is below 1", self.f)));
        }
        check_non_negative("alpha_f", self.alpha_f)?;
        if !(self.n_pulses.is_finite() && self.n_pulses >= 1.0) {
            return Err(Error::invalid(
                "n_pulses",
                format!("{} is below 1", self.n_pulses),
            ));
        }
        check_non_negative("l_a", self.l_a)?;
        check_non_negative("l_b", self.l_b)?;
        if self.m_slices == 0 {
            return Err(Error::invalid("m_slices", "must be at least 1"));
        }
        Ok(())
    }
}

/// One party's source settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartySource {
    /// Probability of choosing a signal window.
    pub p_z: f64,
    /// Sending probability inside a signal window.
    pub epsilon: f64,
    /// Vacuum probability inside a decoy window.
    pub p_0: f64,
    /// Probability of the weak decoy inside a decoy window.
    pub p_1: f64,
    /// Weak decoy intensity.
    pub mu_1: f64,
    /// Strong decoy intensity.
    pub mu_2: f64,
    /// Signal intensity.
    pub mu_z: f64,
}

impl PartySource {
    /// Order of the fields in flat vectors and CSV columns.
    pub const FIELD_NAMES: [&'static str; 7] =
        ["p_z", "epsilon", "p_0", "p_1", "mu_1", "mu_2", "mu_z"];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.p_z,
            self.epsilon,
            self.p_0,
            self.p_1,
            self.mu_1,
            self.mu_2,
            self.mu_z,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            p_z: v[0],
            epsilon: v[1],
            p_0: v[2],
            p_1: v[3],
            mu_1: v[4],
            mu_2: v[5],
            mu_z: v[6],
        }
    }

    /// Probability of the strong decoy inside a decoy window.
    pub fn p_2(&self) -> f64 {
        1.0 - self.p_0 - self.p_1
    }

    fn validate(&self, party: &'static str) -> Result<()> {
        let named = |field: &'static str| -> &'static str {
            match (party, field) {
                ("alice", f) => f,
                (_, "p_z") => "p_z_b",
                (_, "epsilon") => "epsilon_b",
                (_, "p_0") => "p_0_b",
                (_, "p_1") => "p_1_b",
                (_, "mu_1") => "mu_1_b",
                (_, "mu_2") => "mu_2_b",
                (_, _) => "mu_z_b",
            }
        };
        for (field, value) in [
            ("p_z", self.p_z),
            ("epsilon", self.epsilon),
            ("p_0", self.p_0),
            ("p_1", self.p_1),
        ] {
            if !(value.is_finite() && value > 0.0 && value < 1.0) {
                return Err(Error::invalid(
                    named(field),
                    format!("{value} is not in (0, 1)"),
                ));
            }
        }
        if self.p_0 + self.p_1 > 1.0 {
            return Err(Error::invalid(named("p_1"), "p_0 + p_1 exceeds 1"));
        }
        for (field, value) in [
            ("mu_1", self.mu_1),
            ("mu_2", self.mu_2),
            ("mu_z", self.mu_z),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    named(field),
                    format!("{value} is not positive"),
                ));
            }
        }
        if self.mu_1 >= self.mu_2 {
            return Err(Error::invalid(
                named("mu_2"),
                "strong decoy must exceed weak decoy",
            ));
        }
        Ok(())
    }
}

/// Source settings of both parties. Bob's values are the primed quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub alice: PartySource,
    pub bob: PartySource,
}

impl SourceParams {
    pub fn symmetric(source: PartySource) -> Self {
        Self {
            alice: source,
            bob: source,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.alice == self.bob
    }

    pub fn validate(&self) -> Result<()> {
        self.alice.validate("alice")?;
        self.bob.validate("bob")
    }

    pub fn to_array(&self) -> [f64; 14] {
        let mut out = [0.0; 14];
        out[..7].copy_from_slice(&self.alice.to_array());
        out[7..].copy_from_slice(&self.bob.to_array());
        out
    }

    pub fn from_array(v: [f64; 14]) -> Self {
        let mut a = [0.0; 7];
        let mut b = [0.0; 7];
        a.copy_from_slice(&v[..7]);
        b.copy_from_slice(&v[7..]);
        Self {
            alice: PartySource::from_array(a),
            bob: PartySource::from_array(b),
        }
    }
}

impl Default for PartySource {
    /// A reasonable starting point for long-distance symmetric links.
    fn default() -> Self {
        Self {
            p_z: 0.8,
            epsilon: 0.25,
            p_0: 0.2,
            p_1: 0.6,
            mu_1: 0.1,
            mu_2: 0.4,
            mu_z: 0.4,
        }
    }
}
