//! Least-squares log-log rate fitting.

use crate::{CliError, CliResult};

/// Fit log(value) = a + slope·log(n) by ordinary least squares.
/// Returns (slope, standard error of the slope).
pub fn fit_rate(pairs: &[(f64, f64)]) -> CliResult<(f64, f64)> {
    if pairs.len() < 3 {
        return Err(CliError::new(format!(
            "rate fit needs at least 3 points, got {}",
            pairs.len()
        )));
    }
    if let Some((n, v)) = pairs.iter().find(|&&(n, v)| !(n > 0.0) || !(v > 0.0)) {
        return Err(CliError::new(format!(
            "rate fit needs positive coordinates, got ({n}, {v})"
        )));
    }
    let m = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, v)| v.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let se = if pairs.len() > 2 { (rss / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((slope, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<(f64, f64)> =
            [100.0, 400.0, 1600.0, 6400.0].iter().map(|&n: &f64| (n, 7.0 * n.powf(-0.25))).collect();
        let (slope, se) = fit_rate(&pairs).unwrap();
        assert!((slope + 0.25).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let pairs = vec![(10.0, 3.0), (100.0, 3.0), (1000.0, 3.0)];
        let (slope, _) = fit_rate(&pairs).unwrap();
        assert!(slope.abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_rate(&[(10.0, 1.0), (20.0, 0.5)]).is_err());
        assert!(fit_rate(&[(10.0, 1.0), (20.0, 0.0), (30.0, 0.5)]).is_err());
    }
}
