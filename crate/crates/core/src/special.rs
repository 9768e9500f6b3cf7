//! Special functions and quadrature used by the channel model.

use std::sync::OnceLock;

/// Beyond this argument `I0(z) - 1` is large enough that the plain product
/// form loses nothing, and the power series would need too many terms.
const SERIES_LIMIT: f64 = 30.0;

/// `I0(z) - 1` by its power series, free of cancellation for small `z`.
pub fn bessel_i0_minus_one(z: f64) -> f64 {
    let quarter = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        term *= quarter / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Exponentially scaled modified Bessel function `exp(-z) I0(z)` for `z >= 0`.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    if z <= SERIES_LIMIT {
        (-z).exp() * (1.0 + bessel_i0_minus_one(z))
    } else {
        // Asymptotic series; at z > 30 the smallest term is below 1e-25.
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * z);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (std::f64::consts::TAU * z).sqrt()
    }
}

/// `exp(-s) I0(z) - exp(-2s)` for `s >= z >= 0`, the phase-averaged
/// probability that a given detector pair sees light minus the both-dark term.
pub(crate) fn averaged_no_click_excess(s: f64, z: f64) -> f64 {
    if z <= SERIES_LIMIT {
        (-s).exp() * (bessel_i0_minus_one(z) - (-s).exp_m1())
    } else {
        (z - s).exp() * bessel_i0_scaled(z) - (-2.0 * s).exp()
    }
}

pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1] via Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = nf * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 64-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(64))
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn i0_reference_values() {
        // I0(1) = 1.2660658777520082, I0(10) = 2815.716628466254
        assert_relative_eq!(
            1.0 + bessel_i0_minus_one(1.0),
            1.266_065_877_752_008_2,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            bessel_i0_scaled(10.0) * 10f64.exp(),
            2_815.716_628_466_254,
            max_relative = 1e-14
        );
        // Series and asymptotic branches meet at the cutoff.
        let below = (-30.0f64).exp() * (1.0 + bessel_i0_minus_one(30.0));
        let mut above = 1.0;
        let mut term = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * 30.0);
            above += term;
        }
        above /= (std::f64::consts::TAU * 30.0).sqrt();
        assert_relative_eq!(below, above, max_relative = 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_and_cosine() {
        let rule = GaussLegendre::new(16);
        assert_relative_eq!(
            rule.integrate(0.0, 2.0, |x| x.powi(7)),
            32.0,
            max_relative = 1e-14
        );
        let std = GaussLegendre::standard();
        assert_relative_eq!(
            std.integrate(0.0, std::f64::consts::PI, |x| x.sin()),
            2.0,
            max_relative = 1e-14
        );
    }
}
