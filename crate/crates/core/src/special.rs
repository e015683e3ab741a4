//! Special functions: log-gamma, regularized incomplete gamma, and the
//! CDFs derived from them (normal, Poisson).
//!
//! The incomplete gamma function uses the textbook series / continued
//! fraction split at x = a + 1, targeting absolute error around 1e-12.

// Inherent f64 methods shadow this under std; no_std builds resolve
// exp/ln/sqrt through the trait (libm).
#[allow(unused_imports)]
use num_traits::Float;

const MAX_ITER: usize = 400;
const EPS: f64 = 1e-16;

/// ln Γ(x) for x > 0 (Lanczos approximation, g = 7, n = 9).
pub fn lgamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = core::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - lgamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * core::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    lgamma(x).exp()
}

/// Regularized lower incomplete gamma P(a, x) = γ(a, x)/Γ(a), a > 0, x ≥ 0.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let log_pre = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        series_p(a, x) * log_pre.exp()
    } else {
        1.0 - cf_q(a, x) * log_pre.exp()
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x), computed on the
/// branch that avoids cancellation.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let log_pre = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        1.0 - series_p(a, x) * log_pre.exp()
    } else {
        cf_q(a, x) * log_pre.exp()
    }
}

/// Series for P(a, x)·Γ(a)·e^x·x^{−a}: Σ x^n / (a(a+1)…(a+n)).
fn series_p(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for Q(a, x)·Γ(a)·e^x·x^{−a} (modified Lentz).
fn cf_q(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Error function via the incomplete gamma identity erf(x) = P(1/2, x²)·sign(x).
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x > 0.0 {
        gamma_p(0.5, x * x)
    } else {
        -gamma_p(0.5, x * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / core::f64::consts::SQRT_2))
}

/// Poisson(λ) CDF at integer k: P(X ≤ k) = Q(k+1, λ).
pub fn poisson_cdf(k: i64, lambda: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    gamma_q((k + 1) as f64, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lgamma_known_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-13);
        assert!((gamma(0.5) - core::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((lgamma(10.5) - 13.940_625_219_403_763).abs() < 1e-10);
    }

    #[test]
    fn incomplete_gamma_basics() {
        // P(1, x) = 1 − e^{−x}
        for &x in &[0.1, 0.7, 1.5, 4.0, 10.0] {
            let expect = 1.0 - (-x as f64).exp();
            assert!((gamma_p(1.0, x) - expect).abs() < 1e-13);
        }
        // complement consistency
        for &(a, x) in &[(0.5, 0.2), (2.5, 3.0), (7.0, 4.0)] {
            let s = gamma_p(a, x) + gamma_q(a, x);
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn erf_and_normal_cdf() {
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-12);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn poisson_cdf_matches_direct_sum() {
        let lambda = 3.7;
        let mut acc = 0.0;
        let mut term = (-lambda as f64).exp();
        for k in 0..12i64 {
            acc += term;
            let got = poisson_cdf(k, lambda);
            assert!((got - acc).abs() < 1e-12, "k={k}: {got} vs {acc}");
            term *= lambda / (k + 1) as f64;
        }
        assert_eq!(poisson_cdf(-1, lambda), 0.0);
    }
}
