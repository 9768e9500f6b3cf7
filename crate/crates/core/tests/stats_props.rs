use proptest::prelude::*;
use snskit::stats::{
    binomial_tail, chernoff_expected_bounds, chernoff_observed_bounds, invert_tail_for_m,
    invert_tail_for_p, mcdiarmid_delta, shannon_entropy, TailQuery,
};

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Left-hand sides of the four governing equations, in log form.
fn lhs_expected_lower(x: f64, d: f64) -> f64 {
    x / (1.0 + d) * (d - (1.0 + d) * d.ln_1p())
}
fn lhs_expected_upper(x: f64, d: f64) -> f64 {
    x / (1.0 - d) * (-d - (1.0 - d) * (-d).ln_1p())
}
fn lhs_observed_upper(y: f64, d: f64) -> f64 {
    y * (d - (1.0 + d) * d.ln_1p())
}
fn lhs_observed_lower(y: f64, d: f64) -> f64 {
    y * (-d - (1.0 - d) * (-d).ln_1p())
}

/// Sum of binomial terms with exact integer coefficients.
fn direct_tail(n: u64, p: f64, m: u64) -> f64 {
    let mut binom = vec![1.0f64; n as usize + 1];
    for k in 1..=n as usize {
        binom[k] = binom[k - 1] * (n as usize + 1 - k) as f64 / k as f64;
    }
    (m..=n)
        .map(|k| binom[k as usize] * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
        .sum()
}

proptest! {
    #[test]
    fn chernoff_round_trip(x in log_uniform(1.0, 1e12), xi in log_uniform(1e-15, 1e-1)) {
        let target = (xi / 2.0).ln();
        let e = chernoff_expected_bounds(x, xi).unwrap();
        prop_assert!(rel_err(lhs_expected_lower(x, e.delta_lower), target) < 1e-9);
        prop_assert!(rel_err(lhs_expected_upper(x, e.delta_upper), target) < 1e-9);
        let o = chernoff_observed_bounds(x, xi).unwrap();
        prop_assert!(rel_err(lhs_observed_upper(x, o.delta_upper), target) < 1e-9);
        if o.lower > 0.0 {
            prop_assert!(rel_err(lhs_observed_lower(x, o.delta_lower), target) < 1e-9);
        }
    }

    #[test]
    fn chernoff_brackets_input(x in log_uniform(1e-6, 1e14), xi in log_uniform(1e-15, 0.5)) {
        let e = chernoff_expected_bounds(x, xi).unwrap();
        prop_assert!(e.lower <= x && x <= e.upper);
        prop_assert!(e.lower >= 0.0 && e.upper.is_finite());
        let o = chernoff_observed_bounds(x, xi).unwrap();
        prop_assert!(o.lower <= x && x <= o.upper);
        prop_assert!(o.lower >= 0.0 && o.upper.is_finite());
    }

    #[test]
    fn larger_failure_prob_tightens(x in log_uniform(1e-2, 1e10), xi in log_uniform(1e-15, 1e-2)) {
        let (tight, loose) = (chernoff_expected_bounds(x, xi * 10.0).unwrap(), chernoff_expected_bounds(x, xi).unwrap());
        prop_assert!(tight.lower >= loose.lower && tight.upper <= loose.upper);
        let (tight, loose) = (chernoff_observed_bounds(x, xi * 10.0).unwrap(), chernoff_observed_bounds(x, xi).unwrap());
        prop_assert!(tight.lower >= loose.lower && tight.upper <= loose.upper);
    }

    #[test]
    fn tail_matches_direct_sum(n in 1u64..=30, p in 0.0f64..=1.0, m_frac in 0.0f64..=1.0) {
        let m = ((n + 1) as f64 * m_frac).round() as u64;
        let q = TailQuery::new(n, p, m).unwrap();
        prop_assert!((binomial_tail(q) - direct_tail(n, p, m)).abs() < 1e-12);
    }

    #[test]
    fn invert_p_inverts_tail(n in 1u64..5000, p in 0.001f64..0.999, z in -3.0f64..6.0) {
        let nf = n as f64;
        let m = (nf * p + z * (nf * p * (1.0 - p)).sqrt()).round().clamp(1.0, nf) as u64;
        let t = binomial_tail(TailQuery::new(n, p, m).unwrap());
        prop_assume!(t > 1e-12 && t < 1.0 - 1e-6);
        let back = invert_tail_for_p(n, m, t).unwrap();
        prop_assert!(rel_err(back, p) < 1e-8, "p = {p}, back = {back}");
    }

    #[test]
    fn invert_m_is_the_smallest_threshold(n in 1u64..200_000, p in 0.0f64..0.6, target in log_uniform(1e-12, 0.5)) {
        let m = invert_tail_for_m(n, p, target).unwrap();
        let tail = |m| binomial_tail(TailQuery::new(n, p, m).unwrap());
        prop_assert!(tail(m) <= target);
        prop_assert!(m == 0 || tail(m - 1) > target);
    }

    #[test]
    fn invert_p_monotone_in_threshold(n in 10u64..10_000, m_frac in 0.0f64..0.9) {
        let m = 1 + ((n - 2) as f64 * m_frac) as u64;
        prop_assert!(invert_tail_for_p(n, m + 1, 1e-2).unwrap() > invert_tail_for_p(n, m, 1e-2).unwrap());
    }

    #[test]
    fn entropy_is_symmetric(x in 0.0f64..=1.0) {
        let y = 1.0 - x;
        prop_assume!(1.0 - y == x);
        prop_assert_eq!(shannon_entropy(x).unwrap(), shannon_entropy(y).unwrap());
        let h = shannon_entropy(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn mcdiarmid_scales_with_sqrt_log(
        n_x1 in log_uniform(1e4, 1e12),
        n_oo in log_uniform(1e4, 1e12),
        events in log_uniform(1.0, 1e8),
        mu1 in 0.001f64..1.0,
        mu1b in 0.001f64..1.0,
        xi in log_uniform(1e-15, 0.5),
    ) {
        let d1 = mcdiarmid_delta(n_x1, n_oo, events, mu1, mu1b, xi).unwrap().delta;
        let d2 = mcdiarmid_delta(n_x1, n_oo, events, mu1, mu1b, xi * xi).unwrap().delta;
        prop_assert!(d1 > 0.0);
        prop_assert!(rel_err(d2, 2f64.sqrt() * d1) < 1e-10);
    }
}

#[test]
fn worked_examples() {
    let e = chernoff_expected_bounds(1e6, 1e-10).unwrap();
    assert!((e.delta_lower - 6.9e-3).abs() < 1e-4 && (e.delta_upper - 6.9e-3).abs() < 1e-4);
    let o = chernoff_observed_bounds(1e6, 1e-10).unwrap();
    let gauss = (2.0 * (2e10f64).ln() / 1e6).sqrt();
    assert!(rel_err(o.delta_lower, gauss) < 0.01 && rel_err(o.delta_upper, gauss) < 0.01);
    assert_eq!(invert_tail_for_m(10, 0.0, 1e-10).unwrap(), 1);
    let m = invert_tail_for_m(1_000_000, 5e-3, 1e-10).unwrap() as f64;
    assert!(rel_err(m, 5000.0 + 6.36 * 5000f64.sqrt()) < 0.002);
}
