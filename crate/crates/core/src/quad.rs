//! Adaptive quadrature (Simpson with Richardson correction).

use crate::error::Error;
use crate::Result;

const MAX_DEPTH: usize = 52;

/// ∫_a^b f dx to absolute tolerance `tol` (plus a matching relative floor).
///
/// The integrand must be smooth on (a, b); integrable endpoint
/// singularities should be substituted away by the caller.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol.max(1e-16 * whole.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergence);
    }
    let lv = step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(lv + rv)
}

#[cfg(test)]
mod tests {
    use super::*;
    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-12).unwrap();
        // ∫ = x⁴/4 − x² + x: (4−4+2) − (1/4−1+(−1)) = 2 − (−7/4) = 3.75
        assert!((v - 3.75).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = adaptive_simpson(&|x: f64| (5.0 * x).sin(), 0.0, core::f64::consts::PI, 1e-11)
            .unwrap();
        let expect = (1.0 - (5.0 * core::f64::consts::PI).cos()) / 5.0;
        assert!((v - expect).abs() < 1e-10);
    }

    #[test]
    fn decaying_tail() {
        let v = adaptive_simpson(&|x: f64| (-0.5 * x).exp(), 0.0, 200.0, 1e-11).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }
}
