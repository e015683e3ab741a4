//! Empirical distance diagnostics for the convergence experiments.
//!
//! The paper's d₃/d_W distances are bounded analytically in `bounds`; the
//! simulation side reports the empirical Kolmogorov distance to the target,
//! the dictionary lower bound on d₃ (Gamma targets), and sample moments.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::special::{normal_cdf, poisson_cdf};
use crate::stein_gamma::{d3_lower_bound, GammaTarget, TestFunction};
use crate::Result;

/// Reference law for [`empirical_distances`].
#[derive(Debug, Clone, Copy)]
pub enum TargetDist {
    Gamma(f64),
    Normal,
    Poisson(f64),
}

/// Output of [`empirical_distances`].
#[derive(Debug, Clone)]
pub struct DistanceRecord {
    /// sup |F̂ − F_target|.
    pub kolmogorov: f64,
    /// Dictionary lower bound on d₃ (Gamma targets only).
    pub d3_lower: Option<f64>,
    /// Mean and central moments 2..4 of the sample.
    pub moments: [f64; 4],
}

/// Empirical Kolmogorov distance, d₃ dictionary lower bound and sample
/// moments against the chosen target.
pub fn empirical_distances(samples: &[f64], target: TargetDist) -> Result<DistanceRecord> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let kolmogorov = match target {
        TargetDist::Gamma(nu) => {
            let t = GammaTarget::new(nu)?;
            kolmogorov_continuous(samples, |x| t.cdf(x))
        }
        TargetDist::Normal => kolmogorov_continuous(samples, normal_cdf),
        TargetDist::Poisson(lambda) => kolmogorov_poisson(samples, lambda),
    };
    let d3_lower = match target {
        TargetDist::Gamma(nu) => {
            let t = GammaTarget::new(nu)?;
            Some(d3_lower_bound(samples, &t, &TestFunction::dictionary())?)
        }
        _ => None,
    };
    Ok(DistanceRecord { kolmogorov, d3_lower, moments: sample_moments(samples) })
}

/// Mean and central moments 2..4.
pub fn sample_moments(samples: &[f64]) -> [f64; 4] {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    [mean, m2 / n, m3 / n, m4 / n]
}

/// sup_x |F̂(x) − F(x)| for a continuous target CDF.
pub fn kolmogorov_continuous<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - f).abs());
    }
    sup
}

/// Kolmogorov distance to Poisson(λ), comparing CDFs at half-integers
/// (both CDFs are right-continuous steps at the integers).
pub fn kolmogorov_poisson(samples: &[f64], lambda: f64) -> f64 {
    let n = samples.len() as f64;
    let max = samples.iter().fold(0.0_f64, |m, &x| m.max(x));
    let kmax = (max as i64).max((4.0 * lambda) as i64) + 10;
    let mut sup = 0.0_f64;
    for k in -1..=kmax {
        let q = k as f64 + 0.5;
        let emp = samples.iter().filter(|&&x| x <= q).count() as f64 / n;
        sup = sup.max((emp - poisson_cdf(k, lambda)).abs());
    }
    sup
}

/// Pearson correlation of paired samples.
pub fn cross_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::EmptyInput);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Asymptotic-independence diagnostic: max over a grid of marginal-quantile
/// pairs of |F̂_joint(x,y) − F̂₁(x)·F̂₂(y)|, on a `levels × levels` grid of
/// interior quantiles.
pub fn product_gap(xs: &[f64], ys: &[f64], levels: usize) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::EmptyInput);
    }
    let n = xs.len();
    let quantile = |data: &[f64], p: f64| -> f64 {
        let mut v = data.to_vec();
        v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
        let idx = ((n as f64 * p) as usize).min(n - 1);
        v[idx]
    };
    let mut gap = 0.0_f64;
    for a in 1..=levels {
        for b in 1..=levels {
            let px = a as f64 / (levels + 1) as f64;
            let py = b as f64 / (levels + 1) as f64;
            let qx = quantile(xs, px);
            let qy = quantile(ys, py);
            let fx = xs.iter().filter(|&&x| x <= qx).count() as f64 / n as f64;
            let fy = ys.iter().filter(|&&y| y <= qy).count() as f64 / n as f64;
            let joint = xs
                .iter()
                .zip(ys)
                .filter(|&(&x, &y)| x <= qx && y <= qy)
                .count() as f64
                / n as f64;
            gap = gap.max((joint - fx * fy).abs());
        }
    }
    Ok(gap)
}

/// Refuse hybrid configurations violating the order constraints: distinct
/// orders and no Gamma-leg order q₁ with 2·q₁ equal to the other order.
pub fn validate_hybrid_orders(q_gamma: usize, q_other: usize) -> Result<()> {
    if q_gamma == q_other || 2 * q_gamma == q_other {
        return Err(Error::HybridOrderConflict { q1: q_gamma, q2: q_other });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use rand::Rng;

    #[test]
    fn single_atom_at_median_is_half() {
        // a point mass at the target median: Kolmogorov distance 1/2
        let t = GammaTarget::new(1.0).unwrap();
        let mut lo = -1.0;
        let mut hi = 50.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if t.cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let median = 0.5 * (lo + hi);
        let rec = empirical_distances(&[median], TargetDist::Gamma(1.0)).unwrap();
        assert!((rec.kolmogorov - 0.5).abs() < 1e-6);
    }

    #[test]
    fn gamma_samples_have_small_distance() {
        let t = GammaTarget::new(2.0).unwrap();
        let mut rng = derive_stream(31, "ks-gamma", 0);
        let samples: Vec<f64> = (0..50_000).map(|_| t.sample(&mut rng)).collect();
        let rec = empirical_distances(&samples, TargetDist::Gamma(2.0)).unwrap();
        // DKW-style calibration: ~1.36/sqrt(n) at 95%
        assert!(rec.kolmogorov < 0.01, "K = {}", rec.kolmogorov);
        assert!(rec.d3_lower.unwrap() < 0.05);
        assert!((rec.moments[1] - 4.0).abs() < 0.2);
    }

    #[test]
    fn poisson_distance_uses_half_integer_convention() {
        // two-atom empirical law vs Poisson(1): checked by hand at k = -1,0,1
        let samples = [0.0, 0.0, 1.0, 2.0];
        let d = kolmogorov_poisson(&samples, 1.0);
        let e = (-1.0_f64).exp();
        // F̂ at 0.5: 0.5 vs e^{-1}: diff ~ 0.1321; at 1.5: 0.75 vs 2e^{-1}
        let expect = (0.5 - e).abs().max((0.75 - 2.0 * e).abs()).max((1.0 - 2.5 * e).abs());
        assert!((d - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            empirical_distances(&[], TargetDist::Normal),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn correlation_and_product_gap_for_independent_pairs() {
        let mut rng = derive_stream(32, "indep", 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let c = cross_correlation(&xs, &ys).unwrap();
        assert!(c.abs() < 3.0 / (n as f64).sqrt());
        let g = product_gap(&xs, &ys, 5).unwrap();
        assert!(g < 0.02, "gap {g}");
        // strongly dependent pairs have a large gap
        let g = product_gap(&xs, &xs, 5).unwrap();
        assert!(g > 0.1, "gap {g}");
    }

    #[test]
    fn hybrid_order_validation() {
        assert!(validate_hybrid_orders(2, 3).is_ok());
        assert!(matches!(
            validate_hybrid_orders(2, 4),
            Err(Error::HybridOrderConflict { q1: 2, q2: 4 })
        ));
        assert!(validate_hybrid_orders(2, 2).is_err());
    }
}
