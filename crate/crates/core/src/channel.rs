//! Linear channel and detector model producing the statistics an experiment
//! would observe.
//!
//! Both pulses meet at Charlie's beam splitter. With a phase difference `d`,
//! arrived intensities `x` and `y` split into `(x+y)/2 +- sqrt(xy) cos d` at the
//! two detectors. Counts are expectation values rounded to the nearest integer
//! unless the sampled mode is used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{check_non_negative, check_probability, Error, Result};
use crate::flags::{Flag, Flags};
use crate::params::{ExperimentalParams, PhaseSelection, SourceParams};
use crate::special::{averaged_no_click_excess, GaussLegendre};

/// Pulse and heralded-event counts of one source combination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SourceCount {
    pub pulses: f64,
    pub clicks: f64,
}

impl SourceCount {
    /// Counting rate `S = n / N`, 0 for an empty window.
    pub fn rate(&self) -> f64 {
        if self.pulses > 0.0 {
            self.clicks / self.pulses
        } else {
            0.0
        }
    }
}

/// Counts of the five decoy source combinations. The first letter is Alice's
/// source (`o` vacuum, `x` weak, `y` strong), the second Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecoyObservables {
    pub oo: SourceCount,
    pub ox: SourceCount,
    pub xo: SourceCount,
    pub oy: SourceCount,
    pub yo: SourceCount,
}

/// Error statistics of the accepted weak-decoy X windows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct XWindowErrors {
    /// `N_X1`
    pub pulses: f64,
    /// `m_X1`
    pub errors: f64,
    /// `T_X1 = m_X1 / N_X1`
    pub rate: f64,
}

/// Effective events of Z windows by who sent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZCounts {
    /// Alice not sending, Bob sending.
    pub n_c0: f64,
    /// Alice sending, Bob not sending.
    pub n_c1: f64,
    /// Neither sending.
    pub n_v: f64,
    /// Both sending.
    pub n_d: f64,
}

impl ZCounts {
    pub fn total(&self) -> f64 {
        self.n_c0 + self.n_c1 + self.n_v + self.n_d
    }
}

/// Outcome of active odd-parity pairing on the Z-window bits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AoppCounts {
    /// Pairs in each of the two halves.
    pub n_g: f64,
    /// Bits kept in each half after the parity check.
    pub n_t_prime: f64,
    /// Odd-parity pairs had Bob paired at random.
    pub n_odd: f64,
    /// Bit-flip error rate of the kept bits.
    pub e_prime: f64,
}

/// Everything the estimators consume.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservedStats {
    pub decoy: DecoyObservables,
    pub x1: XWindowErrors,
    pub z: ZCounts,
    pub aopp: AoppCounts,
    pub flags: Flags,
}

impl ObservedStats {
    /// `n_t`, the number of effective Z-window events.
    pub fn n_t(&self) -> f64 {
        self.z.total()
    }
}

/// Channel transmittances including detector efficiency, `(eta_A, eta_B)`.
pub fn transmittance(exp: &ExperimentalParams) -> (f64, f64) {
    let eta = |l: f64| exp.eta_d * 10f64.powf(-exp.alpha_f * l / 10.0);
    (eta(exp.l_a), eta(exp.l_b))
}

/// Probability that exactly one of Charlie's detectors clicks when phase
/// randomized pulses of arrived intensities `x` and `y` interfere.
///
/// `S = 2(1-p_d) exp(-(x+y)/2) I0(sqrt(xy)) - 2(1-p_d)^2 exp(-(x+y))`
pub fn heralded_rate(x: f64, y: f64, p_d: f64) -> Result<f64> {
    check_non_negative("x", x)?;
    check_non_negative("y", y)?;
    check_probability("p_d", p_d)?;
    Ok(heralded_rate_unchecked(x, y, p_d))
}

fn heralded_rate_unchecked(x: f64, y: f64, p_d: f64) -> f64 {
    let s = 0.5 * (x + y);
    let z = (x * y).sqrt();
    let excess = averaged_no_click_excess(s, z);
    2.0 * (1.0 - p_d) * (excess + p_d * (-2.0 * s).exp())
}

/// Decoy-source pulse counts and their heralded events.
pub fn simulate_decoy_observables(
    exp: &ExperimentalParams,
    src: &SourceParams,
) -> (DecoyObservables, Flags) {
    let n = exp.n_pulses;
    let (a, b) = (&src.alice, &src.bob);
    let (eta_a, eta_b) = transmittance(exp);
    let alice_vacuum = (1.0 - a.p_z) * a.p_0 + a.p_z * (1.0 - a.epsilon);
    let bob_vacuum = (1.0 - b.p_z) * b.p_0 + b.p_z * (1.0 - b.epsilon);

    let oo = ((1.0 - a.p_z) * ((1.0 - b.p_z) * a.p_0 * b.p_0 + b.p_z * a.p_0 * (1.0 - b.epsilon))
        + a.p_z * (1.0 - b.p_z) * (1.0 - a.epsilon) * b.p_0)
        * n;
    let ox = (1.0 - b.p_z) * b.p_1 * alice_vacuum * n;
    let xo = (1.0 - a.p_z) * a.p_1 * bob_vacuum * n;
    let oy = (1.0 - b.p_z) * b.p_2() * alice_vacuum * n;
    let yo = (1.0 - a.p_z) * a.p_2() * bob_vacuum * n;

    let count = |pulses: f64, x: f64, y: f64| SourceCount {
        pulses,
        clicks: (pulses * heralded_rate_unchecked(x, y, exp.p_d)).round(),
    };
    let obs = DecoyObservables {
        oo: count(oo, 0.0, 0.0),
        ox: count(ox, 0.0, b.mu_1 * eta_b),
        xo: count(xo, a.mu_1 * eta_a, 0.0),
        oy: count(oy, 0.0, b.mu_2 * eta_b),
        yo: count(yo, a.mu_2 * eta_a, 0.0),
    };
    let mut flags = Flags::new();
    if [oo, ox, xo, oy, yo].iter().any(|&p| p < 1.0) {
        flags.raise(Flag::DegenerateWindow);
    }
    (obs, flags)
}

/// Probability that only the wrong detector clicks in an X window with phase
/// mismatch `delta`, arrived intensities `x`, `y`.
fn wrong_click_probability(x: f64, y: f64, delta: f64, e_d: f64, p_d: f64) -> f64 {
    let mean = 0.5 * (x + y);
    let interference = (1.0 - 2.0 * e_d) * (x * y).sqrt() * delta.cos();
    let right = mean + interference;
    let wrong = mean - interference;
    let wrong_clicks = -(-wrong).exp_m1() + p_d * (-wrong).exp();
    wrong_clicks * (1.0 - p_d) * (-right).exp()
}

/// Error rate of accepted weak-decoy X windows.
pub fn x1_error_rate(exp: &ExperimentalParams, src: &SourceParams) -> f64 {
    let (eta_a, eta_b) = transmittance(exp);
    let x = src.alice.mu_1 * eta_a;
    let y = src.bob.mu_1 * eta_b;
    match exp.phase_selection {
        PhaseSelection::Ideal => wrong_click_probability(x, y, 0.0, exp.e_d, exp.p_d),
        PhaseSelection::Sliced => {
            let half_width = std::f64::consts::PI / exp.m_slices as f64;
            GaussLegendre::standard().integrate(0.0, half_width, |d| {
                wrong_click_probability(x, y, d, exp.e_d, exp.p_d)
            }) / half_width
        }
    }
}

/// `(N_X1, m_X1, T_X1)` for the weak-decoy X windows.
pub fn simulate_x1_error(exp: &ExperimentalParams, src: &SourceParams) -> (XWindowErrors, Flags) {
    let (a, b) = (&src.alice, &src.bob);
    let pulses =
        exp.n_pulses * (1.0 - a.p_z) * (1.0 - b.p_z) * a.p_1 * b.p_1 * (2.0 / exp.m_slices as f64);
    let errors = (pulses * x1_error_rate(exp, src)).round();
    let mut flags = Flags::new();
    if exp.m_slices == 1 {
        flags.raise(Flag::NoPhaseSelection);
    }
    let rate = if pulses > 0.0 { errors / pulses } else { 0.0 };
    (
        XWindowErrors {
            pulses,
            errors,
            rate,
        },
        flags,
    )
}

/// Z-window pulse counts for each sending combination, before detection.
fn z_window_pulses(exp: &ExperimentalParams, src: &SourceParams) -> [f64; 4] {
    let (a, b) = (&src.alice, &src.bob);
    let z = exp.n_pulses * a.p_z * b.p_z;
    [
        z * (1.0 - a.epsilon) * b.epsilon,
        z * a.epsilon * (1.0 - b.epsilon),
        z * (1.0 - a.epsilon) * (1.0 - b.epsilon),
        z * a.epsilon * b.epsilon,
    ]
}

fn z_window_rates(exp: &ExperimentalParams, src: &SourceParams) -> [f64; 4] {
    let (eta_a, eta_b) = transmittance(exp);
    let xa = src.alice.mu_z * eta_a;
    let yb = src.bob.mu_z * eta_b;
    [
        heralded_rate_unchecked(0.0, yb, exp.p_d),
        heralded_rate_unchecked(xa, 0.0, exp.p_d),
        heralded_rate_unchecked(0.0, 0.0, exp.p_d),
        heralded_rate_unchecked(xa, yb, exp.p_d),
    ]
}

/// Effective Z-window events `(n_c0, n_c1, n_v, n_d)`.
pub fn simulate_z_counts(exp: &ExperimentalParams, src: &SourceParams) -> ZCounts {
    let pulses = z_window_pulses(exp, src);
    let rates = z_window_rates(exp, src);
    let c = |i: usize| (pulses[i] * rates[i]).round();
    ZCounts {
        n_c0: c(0),
        n_c1: c(1),
        n_v: c(2),
        n_d: c(3),
    }
}

/// Pairing statistics of active odd-parity pairing from Z-window counts.
pub fn simulate_aopp_counts(z: &ZCounts) -> Result<AoppCounts> {
    for (name, v) in [
        ("n_c0", z.n_c0),
        ("n_c1", z.n_c1),
        ("n_v", z.n_v),
        ("n_d", z.n_d),
    ] {
        check_non_negative(name, v)?;
    }
    // Bob's 0-bits come from c0 and d events, his 1-bits from c1 and v events.
    let zeros = z.n_c0 + z.n_d;
    let ones = z.n_c1 + z.n_v;
    if zeros == 0.0 || ones == 0.0 {
        return Err(Error::Degenerate(format!(
            "pairing needs both bit values (zeros = {zeros}, ones = {ones})"
        )));
    }
    let n_g = 0.5 * zeros.min(ones);
    let n_t_prime = (z.n_c0 / zeros * (z.n_c1 / ones) + z.n_d / zeros * (z.n_v / ones)) * n_g;
    let n_odd = zeros * ones / z.total();
    let correct = z.n_c0 * z.n_c1;
    let wrong = z.n_v * z.n_d;
    let e_prime = if correct + wrong > 0.0 {
        wrong / (correct + wrong)
    } else {
        0.0
    };
    Ok(AoppCounts {
        n_g,
        n_t_prime,
        n_odd,
        e_prime,
    })
}

fn assemble(
    decoy: (DecoyObservables, Flags),
    x1: (XWindowErrors, Flags),
    z: ZCounts,
) -> ObservedStats {
    let mut flags = decoy.1;
    flags.extend(&x1.1);
    let aopp = match simulate_aopp_counts(&z) {
        Ok(a) => a,
        Err(_) => {
            flags.raise(Flag::DegeneratePairing);
            AoppCounts::default()
        }
    };
    ObservedStats {
        decoy: decoy.0,
        x1: x1.0,
        z,
        aopp,
        flags,
    }
}

/// Deterministic observed statistics (rounded expectations).
pub fn simulate(exp: &ExperimentalParams, src: &SourceParams) -> ObservedStats {
    assemble(
        simulate_decoy_observables(exp, src),
        simulate_x1_error(exp, src),
        simulate_z_counts(exp, src),
    )
}

/// Observed statistics with every event count drawn from a binomial around its
/// expectation. Pulse counts stay at their expected values.
pub fn simulate_sampled(exp: &ExperimentalParams, src: &SourceParams, seed: u64) -> ObservedStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |pulses: f64, rate: f64| -> f64 {
        let trials = pulses.round().max(0.0) as u64;
        match Binomial::new(trials, rate.clamp(0.0, 1.0)) {
            Ok(dist) => dist.sample(&mut rng) as f64,
            Err(_) => (pulses * rate).round(),
        }
    };

    let (mut decoy, decoy_flags) = simulate_decoy_observables(exp, src);
    let (eta_a, eta_b) = transmittance(exp);
    let (a, b) = (&src.alice, &src.bob);
    let p_d = exp.p_d;
    for (count, x, y) in [
        (&mut decoy.oo, 0.0, 0.0),
        (&mut decoy.ox, 0.0, b.mu_1 * eta_b),
        (&mut decoy.xo, a.mu_1 * eta_a, 0.0),
        (&mut decoy.oy, 0.0, b.mu_2 * eta_b),
        (&mut decoy.yo, a.mu_2 * eta_a, 0.0),
    ] {
        count.clicks = draw(count.pulses, heralded_rate_unchecked(x, y, p_d));
    }

    let (mut x1, x1_flags) = simulate_x1_error(exp, src);
    x1.errors = draw(x1.pulses, x1_error_rate(exp, src));
    x1.rate = if x1.pulses > 0.0 {
        x1.errors / x1.pulses
    } else {
        0.0
    };

    let pulses = z_window_pulses(exp, src);
    let rates = z_window_rates(exp, src);
    let z = ZCounts {
        n_c0: draw(pulses[0], rates[0]),
        n_c1: draw(pulses[1], rates[1]),
        n_v: draw(pulses[2], rates[2]),
        n_d: draw(pulses[3], rates[3]),
    };
    assemble((decoy, decoy_flags), (x1, x1_flags), z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PartySource;
    use approx::assert_relative_eq;

    #[test]
    fn transmittance_values() {
        let mut exp = ExperimentalParams::baseline(0.0);
        assert_eq!(transmittance(&exp), (0.3, 0.3));
        exp.l_a = 125.0;
        exp.l_b = 125.0;
        let (a, b) = transmittance(&exp);
        assert_relative_eq!(a, 9.486_832_980_505_138e-4, max_relative = 1e-14);
        assert_eq!(a, b);
    }

    #[test]
    fn heralded_rate_limits() {
        let p_d = 1e-8;
        assert_relative_eq!(
            heralded_rate(0.0, 0.0, p_d).unwrap(),
            2.0 * p_d * (1.0 - p_d),
            max_relative = 1e-14
        );
        let y = 0.3;
        let expect =
            2.0 * (1.0 - p_d) * (-y / 2.0f64).exp() - 2.0 * (1.0 - p_d).powi(2) * (-y).exp();
        assert_relative_eq!(
            heralded_rate(0.0, y, p_d).unwrap(),
            expect,
            max_relative = 1e-13
        );
        assert!(heralded_rate(-1.0, 0.1, p_d).is_err());
    }

    #[test]
    fn heralded_rate_is_symmetric() {
        for &(x, y) in &[(1e-4, 0.3), (2.0, 0.01), (40.0, 35.0)] {
            assert_eq!(
                heralded_rate(x, y, 1e-7).unwrap(),
                heralded_rate(y, x, 1e-7).unwrap()
            );
        }
    }

    #[test]
    fn aopp_formulas() {
        let z = ZCounts {
            n_c0: 1000.0,
            n_c1: 1000.0,
            n_v: 10.0,
            n_d: 10.0,
        };
        let a = simulate_aopp_counts(&z).unwrap();
        assert_eq!(a.n_g, 505.0);
        assert_relative_eq!(a.e_prime, 100.0 / (1e6 + 100.0), max_relative = 1e-15);
        assert_relative_eq!(a.n_odd, 1010.0 * 1010.0 / 2020.0, max_relative = 1e-15);

        let clean = simulate_aopp_counts(&ZCounts {
            n_v: 0.0,
            n_d: 0.0,
            ..z
        })
        .unwrap();
        assert_eq!(clean.e_prime, 0.0);
        let dirty = simulate_aopp_counts(&ZCounts {
            n_c0: 0.0,
            n_c1: 0.0,
            ..z
        })
        .unwrap();
        assert_eq!(dirty.e_prime, 1.0);
        assert!(simulate_aopp_counts(&ZCounts {
            n_c0: 0.0,
            n_d: 0.0,
            ..z
        })
        .is_err());
    }

    #[test]
    fn z_counts_edge_cases() {
        let exp = ExperimentalParams::baseline(300.0);
        let src = SourceParams::symmetric(PartySource {
            epsilon: 0.0,
            ..PartySource::default()
        });
        let z = simulate_z_counts(&exp, &src);
        assert_eq!(z.n_c1, 0.0);
        assert_eq!(z.n_d, 0.0);

        let mut dark = exp;
        dark.p_d = 0.0;
        dark.eta_d = 0.0;
        let z = simulate_z_counts(&dark, &SourceParams::symmetric(PartySource::default()));
        assert_eq!(z.total(), 0.0);
    }

    #[test]
    fn decoy_windows_are_disjoint_and_symmetric() {
        let exp = ExperimentalParams::baseline(300.0);
        let src = SourceParams::symmetric(PartySource::default());
        let (obs, flags) = simulate_decoy_observables(&exp, &src);
        let total = obs.oo.pulses + obs.ox.pulses + obs.xo.pulses + obs.oy.pulses + obs.yo.pulses;
        assert!(total < exp.n_pulses);
        assert_eq!(obs.ox.pulses, obs.xo.pulses);
        assert_eq!(obs.ox.rate(), obs.xo.rate());
        assert!(flags.is_empty());
    }

    #[test]
    fn x1_error_limits() {
        let mut exp = ExperimentalParams::baseline(300.0);
        let src = SourceParams::symmetric(PartySource::default());
        let (eta_a, eta_b) = transmittance(&exp);
        let (x, y) = (src.alice.mu_1 * eta_a, src.bob.mu_1 * eta_b);

        exp.e_d = 0.5;
        let half = 0.5 * heralded_rate(x + y, 0.0, exp.p_d).unwrap();
        assert_relative_eq!(x1_error_rate(&exp, &src), half, max_relative = 1e-12);

        exp.e_d = 0.0;
        exp.p_d = 0.0;
        exp.phase_selection = PhaseSelection::Ideal;
        assert!(x1_error_rate(&exp, &src).abs() < 1e-18);

        exp.m_slices = 1;
        let (_, flags) = simulate_x1_error(&exp, &src);
        assert!(flags.contains(Flag::NoPhaseSelection));
    }

    #[test]
    fn sampled_mode_is_seeded() {
        let exp = ExperimentalParams::baseline(200.0);
        let src = SourceParams::symmetric(PartySource::default());
        assert_eq!(
            simulate_sampled(&exp, &src, 7),
            simulate_sampled(&exp, &src, 7)
        );
        assert_ne!(
            simulate_sampled(&exp, &src, 7),
            simulate_sampled(&exp, &src, 8)
        );
    }
}
