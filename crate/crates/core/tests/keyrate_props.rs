use approx::assert_relative_eq;
use proptest::prelude::*;
use snskit::keyrate::{
    asymmetric_constraint_residual, key_rate, plob_bounds, raw_key_rate, solve_mu1_bob,
};
use snskit::{
    evaluate, security_budget, BudgetOverrides, ExperimentalParams, Flag, Method, PartySource,
    SecurityBudget, SourceParams, ZigzagMode,
};

fn party(epsilon: f64, mu_1: f64, mu_z: f64) -> PartySource {
    PartySource {
        p_z: 0.8,
        epsilon,
        p_0: 0.05,
        p_1: 0.88,
        mu_1,
        mu_2: 0.6,
        mu_z,
    }
}

fn sig3(x: f64) -> f64 {
    let scale = 10f64.powi(2 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

#[test]
fn repeaterless_bounds_match_reference() {
    let reference = [
        (250.0, 1.44e-5, 4.33e-6),
        (390.0, 2.29e-8, 6.86e-9),
        (420.0, 5.74e-9, 1.72e-9),
        (440.0, 2.29e-9, 6.86e-10),
    ];
    for (l, a, b) in reference {
        let (p1, p2) = plob_bounds(l, 0.2, 0.3).unwrap();
        assert_eq!(sig3(p1), a, "L = {l}");
        assert_eq!(sig3(p2), b, "L = {l}");
    }
    assert!(plob_bounds(-1.0, 0.2, 0.3).is_err());
}

#[test]
fn default_budget_ledger() {
    let b = security_budget(&BudgetOverrides::default()).unwrap();
    assert_relative_eq!(b.eps_s(), 1.5e-10, max_relative = 2e-3);
    assert_relative_eq!(
        b.eps_s(),
        1e-10 + (3e-13 + 2e-13) / 1e-2 + 2e-13,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        b.eps_sec(),
        2.0 * 1e-10 + 4.0 * b.eps_s() + 1e-10 + 6e-10 + 2e-10,
        max_relative = 1e-14
    );
    assert_relative_eq!(b.eps_tol(), 1.8e-9, max_relative = 1e-3);
    assert_eq!(b.eps_tol(), b.eps_cor + b.eps_sec());
    assert_eq!(SecurityBudget::zero().eps_tol(), 0.0);
}

#[test]
fn key_rate_trivial_cases() {
    let exp = ExperimentalParams::baseline(300.0);
    let b = SecurityBudget::default();
    assert_eq!(key_rate(0.0, 0.01, 1e6, 1e-4, &exp, &b).unwrap(), 0.0);
    assert_eq!(key_rate(1e7, 0.5, 1e6, 1e-4, &exp, &b).unwrap(), 0.0);
    assert!(raw_key_rate(1e7, 0.5, 1e6, 1e-4, &exp, &b).unwrap() < 0.0);
}

#[test]
fn residual_examples() {
    let p = party(0.3, 0.1, 0.5);
    assert_eq!(
        asymmetric_constraint_residual(&SourceParams::symmetric(p)),
        0.0
    );
    let src = SourceParams {
        alice: party(0.3, 0.2, 0.5),
        bob: party(0.3, 0.1, 0.5),
    };
    assert_relative_eq!(
        asymmetric_constraint_residual(&src),
        1.0,
        max_relative = 1e-15
    );
}

#[test]
fn zero_dark_count_and_no_signal_gives_no_key() {
    let mut exp = ExperimentalParams::baseline(200.0);
    exp.p_d = 0.0;
    let mut p = party(0.3, 0.1, 0.5);
    p.mu_z = 1e-12;
    let r = evaluate(
        &exp,
        &SourceParams::symmetric(p),
        &SecurityBudget::default(),
        Method::A,
        ZigzagMode::Approx,
    )
    .unwrap();
    assert_eq!(r.rate, 0.0);
    assert!(!r.secure());
    assert!(!r.flags.is_empty());
}

#[test]
fn unequal_arms_require_constraint() {
    let exp = ExperimentalParams::baseline(300.0).with_distance(300.0, 100.0);
    let src = SourceParams {
        alice: party(0.3, 0.1, 0.5),
        bob: party(0.2, 0.1, 0.5),
    };
    assert!(evaluate(
        &exp,
        &src,
        &SecurityBudget::default(),
        Method::A,
        ZigzagMode::Approx
    )
    .is_err());
    let mut fixed = src;
    fixed.bob.mu_1 = solve_mu1_bob(&src);
    assert!(evaluate(
        &exp,
        &fixed,
        &SecurityBudget::default(),
        Method::A,
        ZigzagMode::Approx
    )
    .is_ok());
}

#[test]
fn vacuous_phase_error_forces_zero() {
    let mut exp = ExperimentalParams::baseline(300.0);
    exp.e_d = 0.45;
    let src = SourceParams::symmetric(party(0.27, 0.07, 0.48));
    let r = evaluate(
        &exp,
        &src,
        &SecurityBudget::default(),
        Method::A,
        ZigzagMode::Approx,
    )
    .unwrap();
    assert_eq!(r.rate, 0.0);
    assert!(r.flags.contains(Flag::VacuousPhaseError) || r.flags.contains(Flag::ETauAboveHalf));
}

/// Bisection on the residual as a function of Bob's weak intensity.
fn bisect_mu1_bob(src: &SourceParams) -> f64 {
    let f = |m: f64| {
        let mut s = *src;
        s.bob.mu_1 = m;
        asymmetric_constraint_residual(&s)
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn party_strategy() -> impl Strategy<Value = PartySource> {
    (0.01f64..0.99, 0.001f64..0.5, 0.01f64..1.0)
        .prop_map(|(epsilon, mu_1, mu_z)| party(epsilon, mu_1, mu_z))
}

proptest! {
    #[test]
    fn closed_form_mu1_matches_bisection(alice in party_strategy(), bob in party_strategy()) {
        let src = SourceParams { alice, bob };
        let closed = solve_mu1_bob(&src);
        let bisected = bisect_mu1_bob(&src);
        prop_assert!((closed - bisected).abs() <= 1e-12 * closed.max(1e-300) + 1e-15);
        let mut solved = src;
        solved.bob.mu_1 = closed;
        prop_assert!(asymmetric_constraint_residual(&solved).abs() < 1e-12);
    }

    /// The residual decreases strictly in Bob's weak intensity, so the root is unique.
    #[test]
    fn residual_monotone(alice in party_strategy(), bob in party_strategy(), f in 1.001f64..5.0) {
        let src = SourceParams { alice, bob };
        let mut more = src;
        more.bob.mu_1 = src.bob.mu_1 * f;
        prop_assert!(asymmetric_constraint_residual(&more) < asymmetric_constraint_residual(&src));
    }

    #[test]
    fn plob_ordering(l in 0.0f64..800.0, alpha in 0.1f64..0.3, eta_d in 0.01f64..0.99) {
        let (p1, p2) = plob_bounds(l, alpha, eta_d).unwrap();
        prop_assert!(p1 > p2 && p2 > 0.0);
        let (q1, q2) = plob_bounds(l + 1.0, alpha, eta_d).unwrap();
        prop_assert!(q1 < p1 && q2 < p2);
    }

    #[test]
    fn report_invariants(
        l in 0.0f64..500.0,
        eps in 0.05f64..0.4,
        mu_1 in 0.02f64..0.2,
        mu_z in 0.2f64..0.7,
    ) {
        let exp = ExperimentalParams::baseline(l);
        let src = SourceParams::symmetric(party(eps, mu_1, mu_z));
        for method in Method::ALL {
            let r = evaluate(&exp, &src, &SecurityBudget::default(), method, ZigzagMode::Approx).unwrap();
            prop_assert!(r.rate >= 0.0);
            prop_assert!(r.rate == 0.0 || r.rate == r.raw_rate);
            prop_assert_eq!(r.secure(), r.rate > 0.0);
            prop_assert_eq!(r.ratio1(), Some(r.rate / r.plob1));
            let z = &r.zigzag;
            if r.rate > 0.0 {
                prop_assert!(z.m_bar_s >= z.r);
                prop_assert_eq!(z.e1ph_prime, z.m_bar_s / z.n1_prime);
                prop_assert!(z.e_tau <= 0.5);
            }
        }
    }
}
