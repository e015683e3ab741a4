//! The centred Gamma target Γ̄_ν and its Stein machinery.
//!
//! Γ̄_ν is the law of 2F − ν where F has a Gamma distribution with shape and
//! mean ν/2 (scale 1); its support is [−ν, ∞) and its first four moments are
//! 0, 2ν, 8ν, 12ν² + 48ν. The module provides the density g_ν, the CDF, the
//! first-order Stein solution
//!
//!   U_h(x) = ∫_{−ν}^x (h − E[h(G)]) g_ν dy / (2(x+ν) g_ν(x)),  x > −ν,
//!   U_h(x) = −(h(x) − E[h(G)])/x,                              x ≤ −ν,
//!
//! and the smoothness constants c₀ = max(2, 2/ν), c₁ = max(1, 1/ν + 2/ν²),
//! c₂ = max(2/3, 2/(3ν) − 3/ν² + 4/ν³) that multiply the bound terms.
//!
//! The sup defining the d₃ distance runs over all of H³ and is not
//! computable; a finite dictionary of certified H³ members gives a lower
//! bound which is reported side by side with the analytic upper bounds,
//! never conflated with them.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::quad::adaptive_simpson;
use crate::special::{gamma_p, lgamma};
use crate::Result;

/// Inner quadrature tolerance; public contracts are checked at 1e-9. Kept
/// tight so finite differences across refinement boundaries stay clean.
const QUAD_TOL: f64 = 1e-13;

// ---------------------------------------------------------------------------
// Target
// ---------------------------------------------------------------------------

/// The centred Gamma law Γ̄_ν.
#[derive(Debug, Clone, Copy)]
pub struct GammaTarget {
    nu: f64,
}

impl GammaTarget {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::NonpositiveIntensity);
        }
        Ok(GammaTarget { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn shape(&self) -> f64 {
        0.5 * self.nu
    }

    /// Density g_ν(x) = 2^{−ν/2}/Γ(ν/2) · (x+ν)^{ν/2−1} e^{−(x+ν)/2} for
    /// x > −ν, zero otherwise.
    pub fn density(&self, x: f64) -> f64 {
        let t = x + self.nu;
        if t <= 0.0 {
            return 0.0;
        }
        let a = self.shape();
        (-a * core::f64::consts::LN_2 - lgamma(a) + (a - 1.0) * t.ln() - 0.5 * t).exp()
    }

    /// CDF via the regularized lower incomplete gamma at (ν/2, (x+ν)/2).
    pub fn cdf(&self, x: f64) -> f64 {
        let t = x + self.nu;
        if t <= 0.0 {
            return 0.0;
        }
        gamma_p(self.shape(), 0.5 * t)
    }

    /// Moments 1..=4 of Γ̄_ν: 0, 2ν, 8ν, 12ν² + 48ν.
    pub fn moment(&self, k: usize) -> Result<f64> {
        let nu = self.nu;
        match k {
            1 => Ok(0.0),
            2 => Ok(2.0 * nu),
            3 => Ok(8.0 * nu),
            4 => Ok(12.0 * nu * nu + 48.0 * nu),
            _ => Err(Error::MomentOrderRange { k }),
        }
    }

    /// (c₀, c₁, c₂).
    pub fn smoothness_constants(&self) -> (f64, f64, f64) {
        let nu = self.nu;
        let c0 = f64::max(2.0, 2.0 / nu);
        let c1 = f64::max(1.0, 1.0 / nu + 2.0 / (nu * nu));
        let c2 = f64::max(2.0 / 3.0, 2.0 / (3.0 * nu) - 3.0 / (nu * nu) + 4.0 / (nu * nu * nu));
        (c0, c1, c2)
    }

    /// One draw of Γ̄_ν.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::Distribution;
        let g = rand_distr::Gamma::new(self.shape(), 1.0).expect("valid shape");
        2.0 * g.sample(rng) - self.nu
    }

    /// ∫_{−ν}^∞ w(x) g_ν(x) dx with the endpoint singularity substituted
    /// away; `w` must be smooth with at most polynomial growth.
    pub fn integrate_against_density<F: Fn(f64) -> f64>(&self, w: F) -> Result<f64> {
        let a = self.shape();
        let nu = self.nu;
        // J = ∫_0^∞ t^{a−1} e^{−t/2} w(t−ν) dt, then multiply 2^{−a}/Γ(a).
        let cut = 1.0;
        let head = if a < 1.0 {
            // u = t^a turns t^{a−1} dt into du/a and leaves a C¹ integrand.
            let inv_a = 1.0 / a;
            adaptive_simpson(
                &|u: f64| {
                    let t = u.powf(inv_a);
                    (-0.5 * t).exp() * w(t - nu)
                },
                0.0,
                1.0,
                QUAD_TOL,
            )? / a
        } else {
            adaptive_simpson(
                &|t: f64| t.powf(a - 1.0) * (-0.5 * t).exp() * w(t - nu),
                0.0,
                cut,
                QUAD_TOL,
            )?
        };
        let upper = 120.0 + 8.0 * a;
        let tail = adaptive_simpson(
            &|t: f64| t.powf(a - 1.0) * (-0.5 * t).exp() * w(t - nu),
            cut,
            upper,
            QUAD_TOL,
        )?;
        Ok((head + tail) * (-a * core::f64::consts::LN_2 - lgamma(a)).exp())
    }
}

// ---------------------------------------------------------------------------
// Test functions (the computable slice of H³)
// ---------------------------------------------------------------------------

/// Closed-form shapes with certified derivative bounds.
#[derive(Debug, Clone, Copy)]
pub enum TestShape {
    /// sin(t·x)
    Sin { freq: f64 },
    /// cos(t·x) − 1 (shifted so the function vanishes at 0)
    CosM1 { freq: f64 },
    /// tanh(t·x)
    Tanh { freq: f64 },
    /// constant (U_h ≡ 0 case; not in the default dictionary)
    Const { value: f64 },
}

/// A member of the H³ dictionary: a C³ function with declared sup-norms of
/// the first three derivatives, all ≤ 1.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub id: String,
    shape: TestShape,
    /// The raw shape is divided by this scale.
    scale: f64,
    pub deriv_bounds: [f64; 3],
}

// max |d²/du² tanh(u)| = 4/(3·sqrt(3))
const TANH_D2_MAX: f64 = 0.769_800_358_919_501_3;

impl TestFunction {
    pub fn new(id: &str, shape: TestShape) -> Self {
        let (scale, deriv_bounds) = match shape {
            TestShape::Sin { freq } | TestShape::CosM1 { freq } => {
                let s = f64::max(freq, freq * freq * freq);
                (s, [freq / s, freq * freq / s, freq * freq * freq / s])
            }
            TestShape::Tanh { freq } => {
                let t = freq;
                let s = f64::max(t, f64::max(TANH_D2_MAX * t * t, 2.0 * t * t * t));
                (s, [t / s, TANH_D2_MAX * t * t / s, 2.0 * t * t * t / s])
            }
            TestShape::Const { .. } => (1.0, [0.0, 0.0, 0.0]),
        };
        TestFunction { id: String::from(id), shape, scale, deriv_bounds }
    }

    /// The built-in dictionary: sin, shifted cos and tanh sigmoids at
    /// frequencies 1/2, 1, 2, scaled into H³.
    pub fn dictionary() -> Vec<TestFunction> {
        let mut dict = Vec::new();
        for &t in &[0.5, 1.0, 2.0] {
            dict.push(TestFunction::new(&alloc::format!("sin-{t}"), TestShape::Sin { freq: t }));
            dict.push(TestFunction::new(&alloc::format!("cos-{t}"), TestShape::CosM1 {
                freq: t,
            }));
            dict.push(TestFunction::new(&alloc::format!("tanh-{t}"), TestShape::Tanh {
                freq: t,
            }));
        }
        dict
    }

    pub fn value(&self, x: f64) -> f64 {
        let v = match self.shape {
            TestShape::Sin { freq } => (freq * x).sin(),
            TestShape::CosM1 { freq } => (freq * x).cos() - 1.0,
            TestShape::Tanh { freq } => (freq * x).tanh(),
            TestShape::Const { value } => value,
        };
        v / self.scale
    }

    pub fn d1(&self, x: f64) -> f64 {
        let v = match self.shape {
            TestShape::Sin { freq } => freq * (freq * x).cos(),
            TestShape::CosM1 { freq } => -freq * (freq * x).sin(),
            TestShape::Tanh { freq } => {
                let f = (freq * x).tanh();
                freq * (1.0 - f * f)
            }
            TestShape::Const { .. } => 0.0,
        };
        v / self.scale
    }

    pub fn d2(&self, x: f64) -> f64 {
        let v = match self.shape {
            TestShape::Sin { freq } => -freq * freq * (freq * x).sin(),
            TestShape::CosM1 { freq } => -freq * freq * (freq * x).cos(),
            TestShape::Tanh { freq } => {
                let f = (freq * x).tanh();
                -2.0 * freq * freq * f * (1.0 - f * f)
            }
            TestShape::Const { .. } => 0.0,
        };
        v / self.scale
    }

    pub fn d3(&self, x: f64) -> f64 {
        let v = match self.shape {
            TestShape::Sin { freq } => -freq * freq * freq * (freq * x).cos(),
            TestShape::CosM1 { freq } => freq * freq * freq * (freq * x).sin(),
            TestShape::Tanh { freq } => {
                let f = (freq * x).tanh();
                let s2 = 1.0 - f * f;
                -2.0 * freq * freq * freq * s2 * (1.0 - 3.0 * f * f)
            }
            TestShape::Const { .. } => 0.0,
        };
        v / self.scale
    }
}

// ---------------------------------------------------------------------------
// Stein solution
// ---------------------------------------------------------------------------

/// The first-order Stein solution U_h for one (target, test function) pair.
///
/// The Stein equation is h(x) − E[h(G)] = 2(x+ν)₊·U_h'(x) − x·U_h(x); the
/// solution is continuous on R (l'Hôpital at −ν) and satisfies ‖U_h‖∞ ≤ c₀,
/// ‖U_h'‖∞ ≤ c₁.
pub struct SteinSolution {
    target: GammaTarget,
    h: TestFunction,
    expectation: f64,
    /// Past this t = x+ν the tail form of the integral is used.
    t_switch: f64,
}

impl SteinSolution {
    pub fn new(target: GammaTarget, h: &TestFunction) -> Result<Self> {
        let expectation = target.integrate_against_density(|x| h.value(x))?;
        let a = target.shape();
        Ok(SteinSolution { target, h: h.clone(), expectation, t_switch: 2.0 * a + 8.0 })
    }

    /// E[h(G(ν))], computed once by quadrature.
    pub fn expectation(&self) -> f64 {
        self.expectation
    }

    fn phi(&self, x: f64) -> f64 {
        self.h.value(x) - self.expectation
    }

    /// J(t) = ∫_0^t s^{a−1} e^{−s/2} φ(s−ν) ds (the density normalisation
    /// cancels against the denominator of the quotient, so it is omitted).
    fn j_integral(&self, t: f64) -> Result<f64> {
        let a = self.target.shape();
        let nu = self.target.nu;
        let cut = t.min(1.0);
        let head = if a < 1.0 {
            let inv_a = 1.0 / a;
            adaptive_simpson(
                &|u: f64| {
                    let s = u.powf(inv_a);
                    (-0.5 * s).exp() * self.phi(s - nu)
                },
                0.0,
                cut.powf(a),
                QUAD_TOL,
            )? / a
        } else {
            adaptive_simpson(
                &|s: f64| s.powf(a - 1.0) * (-0.5 * s).exp() * self.phi(s - nu),
                0.0,
                cut,
                QUAD_TOL,
            )?
        };
        if t <= 1.0 {
            return Ok(head);
        }
        let tail = adaptive_simpson(
            &|s: f64| s.powf(a - 1.0) * (-0.5 * s).exp() * self.phi(s - nu),
            1.0,
            t,
            QUAD_TOL,
        )?;
        Ok(head + tail)
    }

    /// J(∞) − J(t) computed directly (J(∞) = 0, but for large t the direct
    /// difference would be pure cancellation).
    fn j_tail(&self, t: f64) -> Result<f64> {
        let a = self.target.shape();
        let nu = self.target.nu;
        let upper = (120.0 + 8.0 * a).max(t + 40.0);
        adaptive_simpson(
            &|s: f64| s.powf(a - 1.0) * (-0.5 * s).exp() * self.phi(s - nu),
            t,
            upper,
            QUAD_TOL,
        )
    }

    /// U_h(x).
    pub fn value(&self, x: f64) -> Result<f64> {
        let nu = self.target.nu;
        let t = x + nu;
        if t <= 0.0 {
            // x ≤ −ν branch; x < 0 there since ν > 0.
            return Ok(-self.phi(x) / x);
        }
        if t * self.target.density(x) < 1e-12 && t < 1.0 {
            return Ok(self.taylor_near_edge(t).0);
        }
        let a = self.target.shape();
        let denom = 2.0 * t.powf(a) * (-0.5 * t).exp();
        if t > self.t_switch {
            Ok(-self.j_tail(t)? / denom)
        } else {
            Ok(self.j_integral(t)? / denom)
        }
    }

    /// U_h'(x): the derivative of the integral quotient for x > −ν
    /// (equivalently the Stein equation rearranged), the explicit derivative
    /// on x ≤ −ν (left-sided at the kink).
    pub fn deriv(&self, x: f64) -> Result<f64> {
        let nu = self.target.nu;
        let t = x + nu;
        if t <= 0.0 {
            return Ok(-self.h.d1(x) / x + self.phi(x) / (x * x));
        }
        if t * self.target.density(x) < 1e-12 && t < 1.0 {
            return Ok(self.taylor_near_edge(t).1);
        }
        let u = self.value(x)?;
        Ok((self.phi(x) + x * u) / (2.0 * t))
    }

    /// Three-term expansion of the integral quotient as t = x + ν → 0⁺, the
    /// numerical analogue of the l'Hôpital step. Returns (U, U').
    fn taylor_near_edge(&self, t: f64) -> (f64, f64) {
        let a = self.target.shape();
        let nu = self.target.nu;
        let p0 = self.phi(-nu);
        let p1 = self.h.d1(-nu);
        let p2 = self.h.d2(-nu);
        let b1 = (p1 - 0.5 * p0) / (a + 1.0);
        let b2 = (0.5 * p2 - 0.5 * p1 + 0.125 * p0) / (a + 2.0);
        let c0 = p0 / a;
        let c1 = b1 + 0.5 * c0;
        let c2 = b2 + 0.5 * b1 + 0.125 * c0;
        (0.5 * (c0 + c1 * t + c2 * t * t), 0.5 * (c1 + 2.0 * c2 * t))
    }
}

/// Dictionary lower bound on d₃(samples, Γ̄_ν): the max over the dictionary
/// of |mean h(sample) − E[h(G)]|. A lower bound on the sup over H³, never an
/// estimate of it.
pub fn d3_lower_bound(
    samples: &[f64],
    target: &GammaTarget,
    dict: &[TestFunction],
) -> Result<f64> {
    if samples.is_empty() || dict.is_empty() {
        return Err(Error::EmptyInput);
    }
    let inv = 1.0 / samples.len() as f64;
    let mut best = 0.0_f64;
    for h in dict {
        let mean: f64 = samples.iter().map(|&x| h.value(x)).sum::<f64>() * inv;
        let eh = target.integrate_against_density(|x| h.value(x))?;
        best = best.max((mean - eh).abs());
    }
    Ok(best)
}
