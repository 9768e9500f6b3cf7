//! Binomial upper tails and their inversions.
//!
//! The probability mass function uses Loader's saddle-point form (Stirling
//! error terms plus the deviance `bd0`), which stays accurate for billions of
//! trials. Upper tails are summed term by term for small trial counts and
//! evaluated through the regularized incomplete beta function otherwise.

use crate::error::{check_open_probability, check_probability, Error, Result};

/// Trial count from which tails are evaluated with the incomplete beta function.
pub const SUMMATION_LIMIT: u64 = 10_000;

/// `Pr(X >= threshold)` for `X ~ Binomial(trials, success_prob)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    trials: u64,
    success_prob: f64,
    threshold: u64,
}

impl TailQuery {
    pub fn new(trials: u64, success_prob: f64, threshold: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::invalid("trials", "must be positive"));
        }
        check_probability("success_prob", success_prob)?;
        if threshold > trials + 1 {
            return Err(Error::invalid(
                "threshold",
                format!("{threshold} exceeds trials + 1 = {}", trials + 1),
            ));
        }
        Ok(Self {
            trials,
            success_prob,
            threshold,
        })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }
}

/// Upper tail `Pr(X >= threshold)`.
pub fn binomial_tail(q: TailQuery) -> f64 {
    upper_tail(q.trials, q.success_prob, q.threshold)
}

fn upper_tail(n: u64, p: f64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let tail = if n < SUMMATION_LIMIT {
        summed_tail(n, p, m)
    } else {
        beta_tail(n, p, m).unwrap_or_else(|| summed_tail(n, p, m))
    };
    tail.clamp(0.0, 1.0)
}

/// Sums whichever side of the distribution does not contain the mean and
/// complements if needed.
pub(crate) fn summed_tail(n: u64, p: f64, m: u64) -> f64 {
    let q = 1.0 - p;
    let mean = n as f64 * p;
    if m as f64 > mean {
        let ratio = p / q;
        let mut k = m;
        let mut term = binomial_pmf(n, p, m);
        let mut sum = 0.0;
        while term > 0.0 {
            sum += term;
            if k == n || term < sum * 1e-18 {
                break;
            }
            term *= (n - k) as f64 / (k + 1) as f64 * ratio;
            k += 1;
        }
        sum
    } else {
        let ratio = q / p;
        let mut k = m - 1;
        let mut term = binomial_pmf(n, p, k);
        let mut sum = 0.0;
        while term > 0.0 {
            sum += term;
            if k == 0 || term < sum * 1e-18 {
                break;
            }
            term *= k as f64 / (n - k + 1) as f64 * ratio;
            k -= 1;
        }
        1.0 - sum
    }
}

/// `I_p(m, n - m + 1)` by Lentz's continued fraction, with the prefactor taken
/// from the accurate pmf. `None` if the fraction fails to converge.
pub(crate) fn beta_tail(n: u64, p: f64, m: u64) -> Option<f64> {
    let a = m as f64;
    let b = (n - m + 1) as f64;
    let q = 1.0 - p;
    if p < (a + 1.0) / (a + b + 2.0) {
        let front = binomial_pmf(n, p, m) * q;
        Some(front * beta_continued_fraction(a, b, p)?)
    } else {
        let front = binomial_pmf(n, p, m - 1) * p;
        Some(1.0 - front * beta_continued_fraction(b, a, q)?)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Option<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 1_000_000usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Some(h);
        }
    }
    None
}

/// `Pr(X = k)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if k == 0 {
        let lc = if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
        return lc.exp();
    }
    if k == n {
        let lc = if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
        return lc.exp();
    }
    let kf = k as f64;
    let lc = stirling_error(n)
        - stirling_error(k)
        - stirling_error(n - k)
        - bd0(kf, nf * p)
        - bd0(nf - kf, nf * q);
    let lf = std::f64::consts::TAU.ln() + kf.ln() + (-kf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `ln(n!) - (n + 1/2) ln n + n - ln sqrt(2 pi)`.
fn stirling_error(n: u64) -> f64 {
    const EXACT: [f64; 16] = [
        0.0,
        0.081_061_466_795_327_258,
        0.041_340_695_955_409_294,
        0.027_677_925_684_998_339,
        0.020_790_672_103_765_093,
        0.016_644_691_189_821_192,
        0.013_876_128_823_070_748,
        0.011_896_709_945_891_770,
        0.010_411_265_261_972_096,
        0.009_255_462_182_712_733,
        0.008_330_563_433_362_871,
        0.007_573_675_487_951_841,
        0.006_942_840_107_209_530,
        0.006_408_994_188_004_207,
        0.005_951_370_112_758_848,
        0.005_554_733_551_962_801,
    ];
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < 16 {
        return EXACT[n as usize];
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// The success probability at which `Pr(X >= threshold) = target`.
///
/// The tail is strictly increasing in the success probability, so the root is
/// unique; it is found by bisection to a relative width of `1e-12`.
pub fn invert_tail_for_p(trials: u64, threshold: u64, target: f64) -> Result<f64> {
    check_open_probability("target", target)?;
    if threshold == 0 {
        return Err(Error::invalid(
            "threshold",
            "a zero threshold has tail 1 for every success probability",
        ));
    }
    if threshold > trials {
        return Err(Error::invalid(
            "threshold",
            format!("{threshold} exceeds trials = {trials}"),
        ));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..400 {
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else if lo == 0.0 && hi < 1e-3 {
            // Walk down by decades while the bracket still touches zero.
            hi * 1e-3
        } else {
            0.5 * (lo + hi)
        };
        if upper_tail(trials, mid, threshold) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi * 0.5 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The smallest threshold whose upper tail is at most `target`.
pub fn invert_tail_for_m(trials: u64, success_prob: f64, target: f64) -> Result<u64> {
    check_open_probability("target", target)?;
    check_probability("success_prob", success_prob)?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    // Invariant: tail(lo) > target >= tail(hi).
    let mut lo = 0u64;
    let mut hi = trials + 1;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if upper_tail(trials, success_prob, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tail(n: u64, p: f64, m: u64) -> f64 {
        binomial_tail(TailQuery::new(n, p, m).unwrap())
    }

    #[test]
    fn trivial_tails() {
        assert_eq!(tail(100, 0.3, 0), 1.0);
        assert_eq!(tail(100, 0.3, 101), 0.0);
        assert_relative_eq!(tail(10, 0.5, 10), 9.765625e-4, max_relative = 1e-13);
    }

    #[test]
    fn query_validation() {
        assert!(TailQuery::new(10, 0.5, 12).is_err());
        assert!(TailQuery::new(10, 1.5, 3).is_err());
        assert!(TailQuery::new(0, 0.5, 0).is_err());
        assert!(TailQuery::new(10, 0.5, 11).is_ok());
    }

    #[test]
    fn pmf_sums_to_one() {
        for &(n, p) in &[(1u64, 0.3), (17, 0.01), (250, 0.5), (3000, 0.999)] {
            let total: f64 = (0..=n).map(|k| binomial_pmf(n, p, k)).sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn beta_and_summation_agree_in_overlap() {
        for &(n, p, m) in &[
            (20_000u64, 0.01, 260u64),
            (20_000, 0.01, 150),
            (50_000, 0.3, 15_300),
            (50_000, 0.3, 14_000),
            (12_345, 0.5, 6_600),
        ] {
            let a = summed_tail(n, p, m);
            let b = beta_tail(n, p, m).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn invert_p_single_outcome() {
        let p = invert_tail_for_p(10, 10, 9.765625e-4).unwrap();
        assert_relative_eq!(p, 0.5, max_relative = 1e-11);
    }

    #[test]
    fn invert_p_rejects_zero_threshold() {
        assert!(invert_tail_for_p(10, 0, 0.5).is_err());
        assert!(invert_tail_for_p(10, 11, 0.5).is_err());
        assert!(invert_tail_for_p(10, 3, 1.0).is_err());
    }

    #[test]
    fn invert_m_zero_probability() {
        assert_eq!(invert_tail_for_m(10, 0.0, 1e-10).unwrap(), 1);
        assert_eq!(invert_tail_for_m(10, 1.0, 1e-10).unwrap(), 11);
    }

    #[test]
    fn invert_m_is_tight() {
        let m = invert_tail_for_m(1_000_000, 5e-3, 1e-10).unwrap();
        assert!(tail(1_000_000, 5e-3, m) <= 1e-10);
        assert!(tail(1_000_000, 5e-3, m - 1) > 1e-10);
    }
}
