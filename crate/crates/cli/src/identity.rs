//! The identity suite: runtime re-checks of the module-level identities,
//! exposed through `pchaos check` (exit 0 iff everything passes).

use pchaos_core::bounds::carre_expansion;
use pchaos_core::chaos_sim::pathwise::PathwisePlan;
use pchaos_core::chaos_sim::{
    self, chaos_eval, derivative_eval, disk, multiple_integral_eval, sample, sample_into,
    ustat_direct, ustat_eval, PoissonSample,
};
use pchaos_core::contract::{
    binomial, c_q_constant, contract, contraction_norm, norm, norm2, product_kernel,
    sym_contract, symmetrize,
};
use pchaos_core::rng::derive_stream;
use pchaos_core::space::{Factor, Kernel, MeasureSpace, PiecewisePoly, Term};
use pchaos_core::stein_gamma::{GammaTarget, SteinSolution, TestFunction};

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: Option<String>,
}

type Check = fn(u64) -> Result<(), String>;

fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("kernel-symmetry", check_symmetry),
        ("square-norm-identity", check_us_identity),
        ("contraction-reflection", check_reflection),
        ("symmetrize-idempotent", check_sym_idempotent),
        ("symmetrisation-contracts-norms", check_sym_cauchy_schwarz),
        ("middle-constants", check_cq),
        ("separable-dense-coherence", check_dense_coherence),
        ("gamma-moment-quadrature", check_gamma_moments),
        ("stein-equation-residual", check_stein_residual),
        ("product-formula-pathwise", check_product_formula),
        ("add-one-cost", check_add_one_cost),
        ("ustat-chaos-decomposition", check_ustat_decomposition),
        ("carre-pathwise", check_carre),
        ("integral-isometry", check_isometry),
        ("ustat-fast-vs-direct", check_ustat_oracle),
        ("disk-graph-oracle", check_disk_oracle),
        ("sampler-reproducibility", check_repro),
    ]
}

/// Run every check with streams derived from `seed`.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    checks()
        .into_iter()
        .map(|(name, f)| match f(seed) {
            Ok(()) => CheckResult { name, pass: true, detail: None },
            Err(e) => CheckResult { name, pass: false, detail: Some(e) },
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

fn sign_kernel(n: f64) -> (MeasureSpace, Kernel) {
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, n).unwrap();
    (space, Kernel::rank_one(2, 1.0 / n, crate::builtins::sign_factor()))
}

/// Random symmetric order-2 separable kernel from step factors.
fn random_kernel(seed: u64, idx: u64, terms: usize) -> (MeasureSpace, Kernel) {
    use rand::Rng;
    let mut rng = derive_stream(seed, "identity/random-kernel", idx);
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 1.0).unwrap();
    let mut list = Vec::new();
    for _ in 0..terms {
        let a: f64 = rng.random_range(-1.0..0.9);
        let b: f64 = rng.random_range(a + 0.05..1.0);
        let c: f64 = rng.random_range(-2.0..2.0);
        let v: f64 = rng.random_range(0.2..2.0);
        list.push((c, Factor::step(a, b, v)));
    }
    (space, Kernel::rank_sum(2, list))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

fn check_symmetry(seed: u64) -> Result<(), String> {
    use rand::Rng;
    let mut rng = derive_stream(seed, "identity/symmetry", 0);
    for idx in 0..10 {
        let (space, f) = random_kernel(seed, idx, 3);
        let f = symmetrize(&space, &f).map_err(s)?;
        for _ in 0..20 {
            let x = [rng.random_range(-1.0..1.0)];
            let y = [rng.random_range(-1.0..1.0)];
            let a = f.eval_plain(&space, &[&x, &y]).map_err(s)?;
            let b = f.eval_plain(&space, &[&y, &x]).map_err(s)?;
            ensure((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "asymmetric value")?;
        }
    }
    Ok(())
}

fn check_us_identity(seed: u64) -> Result<(), String> {
    // 4!·‖f⋆̃₀⁰f‖² = 2(2‖f‖²)² + 16‖f⋆₁¹f‖²
    for idx in 0..50 {
        let (space, f) = random_kernel(seed, 100 + idx, 3);
        let t00 = sym_contract(&space, &f, &f, 0, 0).map_err(s)?;
        let lhs = 24.0 * norm2(&space, &t00).map_err(s)?;
        let n2 = norm2(&space, &f).map_err(s)?;
        let c11 = contraction_norm(&space, &f, 1, 1).map_err(s)?;
        let rhs = 2.0 * (2.0 * n2) * (2.0 * n2) + 16.0 * c11 * c11;
        ensure(
            (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs),
            format!("kernel {idx}: {lhs} vs {rhs}"),
        )?;
    }
    Ok(())
}

fn check_reflection(seed: u64) -> Result<(), String> {
    // ‖f⋆ₐ⁰f‖ = ‖f⋆_q^{q−a}f‖ for q ∈ {2, 4}
    let (space, f) = random_kernel(seed, 200, 2);
    for a in 2..=2usize {
        let lhs = contraction_norm(&space, &f, a, 0).map_err(s)?;
        let rhs = contraction_norm(&space, &f, 2, 2 - a).map_err(s)?;
        ensure((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs), "q=2 reflection")?;
    }
    let e1 = Factor::step(-1.0, 0.3, 0.8);
    let e2 = Factor::step(-0.2, 1.0, -0.6);
    let f4 = Kernel::rank_sum(4, vec![(1.0, e1), (0.5, e2)]);
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 1.0).unwrap();
    for a in 2..=4usize {
        let lhs = contraction_norm(&space, &f4, a, 0).map_err(s)?;
        let rhs = contraction_norm(&space, &f4, 4, 4 - a).map_err(s)?;
        ensure(
            (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs),
            format!("q=4 reflection a={a}: {lhs} vs {rhs}"),
        )?;
    }
    Ok(())
}

fn check_sym_idempotent(seed: u64) -> Result<(), String> {
    use rand::Rng;
    let (space, f) = random_kernel(seed, 300, 3);
    let t = contract(&space, &f, &f, 1, 0).map_err(s)?;
    let s1 = symmetrize(&space, &t).map_err(s)?;
    let s2 = symmetrize(&space, &s1).map_err(s)?;
    let mut rng = derive_stream(seed, "identity/idempotent", 0);
    for _ in 0..50 {
        let args: Vec<[f64; 1]> = (0..3).map(|_| [rng.random_range(-1.0..1.0)]).collect();
        let refs: Vec<&[f64]> = args.iter().map(|a| a.as_slice()).collect();
        let a = s1.eval_plain(&space, &refs).map_err(s)?;
        let b = s2.eval_plain(&space, &refs).map_err(s)?;
        ensure((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "symmetrize not idempotent")?;
    }
    Ok(())
}

fn check_sym_cauchy_schwarz(seed: u64) -> Result<(), String> {
    for idx in 0..10 {
        let (space, f) = random_kernel(seed, 400 + idx, 3);
        for (r, l) in [(1, 0), (2, 0), (2, 1), (1, 1)] {
            let plain = contraction_norm(&space, &f, r, l).map_err(s)?;
            let tilde = norm(&space, &sym_contract(&space, &f, &f, r, l).map_err(s)?).map_err(s)?;
            ensure(tilde <= plain + 1e-12 * (1.0 + plain), "‖⋆̃‖ > ‖⋆‖")?;
        }
    }
    Ok(())
}

fn check_cq(_seed: u64) -> Result<(), String> {
    ensure(c_q_constant(2).map_err(s)? == 1.0, "c_2")?;
    ensure((c_q_constant(4).map_err(s)? - 1.0 / 18.0).abs() < 1e-18, "c_4")?;
    ensure((c_q_constant(6).map_err(s)? - 1.0 / 600.0).abs() < 1e-18, "c_6")
}

fn check_dense_coherence(_seed: u64) -> Result<(), String> {
    let pts: Vec<f64> = (0..40).map(|i| -1.0 + (i as f64 + 0.5) * 0.05).collect();
    let space = MeasureSpace::grid_1d(pts, vec![0.05 * 0.5; 40], 2.0).unwrap();
    let f = Kernel::rank_sum(
        2,
        vec![(1.0, Factor::step(-1.0, 0.2, 0.7)), (0.6, Factor::step(-0.4, 1.0, -1.3))],
    );
    let fd = f.to_dense(&space).map_err(s)?;
    for (r, l) in [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)] {
        let a = contraction_norm(&space, &f, r, l).map_err(s)?;
        let cd = contract(&space, &fd, &fd, r, l).map_err(s)?;
        let b = norm(&space, &cd).map_err(s)?;
        ensure((a - b).abs() <= 1e-8 * (1.0 + b), format!("(r,l)=({r},{l})"))?;
    }
    Ok(())
}

fn check_gamma_moments(_seed: u64) -> Result<(), String> {
    for &nu in &[0.5, 1.0, 2.0, 5.0] {
        let t = GammaTarget::new(nu).map_err(s)?;
        for k in 1..=4usize {
            let q = t
                .integrate_against_density(|x| x.powi(k as i32))
                .map_err(|e| format!("nu={nu}: {e}"))?;
            let exact = t.moment(k).map_err(s)?;
            ensure(
                (q - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                format!("nu={nu} k={k}: {q} vs {exact}"),
            )?;
        }
    }
    Ok(())
}

fn check_stein_residual(_seed: u64) -> Result<(), String> {
    for &nu in &[1.0, 2.0] {
        let t = GammaTarget::new(nu).map_err(s)?;
        for h in TestFunction::dictionary() {
            let u = SteinSolution::new(t, &h).map_err(s)?;
            let eh = u.expectation();
            let fd = 1e-3;
            for i in 0..200 {
                let x = -nu + 0.01 + i as f64 * (nu + 10.0) / 200.0;
                let du =
                    (u.value(x + fd).map_err(s)? - u.value(x - fd).map_err(s)?) / (2.0 * fd);
                let resid =
                    h.value(x) - eh - (2.0 * (x + nu) * du - x * u.value(x).map_err(s)?);
                ensure(
                    resid.abs() <= 1e-6,
                    format!("{} nu={nu} x={x}: residual {resid:e}", h.id),
                )?;
            }
        }
    }
    Ok(())
}

fn check_product_formula(seed: u64) -> Result<(), String> {
    let (space, f) = sign_kernel(8.0);
    let mut exp = pchaos_core::space::ChaosExpansion::constant_only(
        product_kernel(&space, &f, 0).map_err(s)?.scalar_value(),
    );
    for p in 1..=4usize {
        exp.insert(p, product_kernel(&space, &f, p).map_err(s)?);
    }
    let mut rng = derive_stream(seed, "identity/product-formula", 0);
    for _ in 0..200 {
        let cfgn = sample(&space, &mut rng);
        let lhs = multiple_integral_eval(&space, &f, &cfgn).map_err(s)?.powi(2);
        let rhs = chaos_eval(&space, &exp, &cfgn).map_err(s)?;
        ensure((lhs - rhs).abs() <= 1e-7 * (1.0 + lhs), format!("{lhs} vs {rhs}"))?;
    }
    Ok(())
}

fn check_add_one_cost(seed: u64) -> Result<(), String> {
    let (space, f) = sign_kernel(7.0);
    let mut rng = derive_stream(seed, "identity/add-one", 0);
    for _ in 0..200 {
        let cfgn = sample(&space, &mut rng);
        let z = [chaos_sim::sample_point(&space, &mut rng)];
        let d = derivative_eval(&space, &f, &cfgn, &z).map_err(s)?;
        let before = multiple_integral_eval(&space, &f, &cfgn).map_err(s)?;
        let mut aug = cfgn.clone();
        aug.push(&z, 1, None);
        let oracle = multiple_integral_eval(&space, &f, &aug).map_err(s)? - before;
        ensure((d - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()), "add-one mismatch")?;
    }
    Ok(())
}

fn check_ustat_decomposition(seed: u64) -> Result<(), String> {
    // Poissonized U-statistic = Σ_i C(k,i)·I_i(partial integrals), pathwise.
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 6.0).unwrap();
    let h = Kernel::rank_one(2, 1.0, Factor::step(-0.3, 0.8, 1.2));
    let mut rng = derive_stream(seed, "identity/lp-decomposition", 0);
    for _ in 0..200 {
        let cfgn = sample(&space, &mut rng);
        let u = ustat_eval(&space, &h, &cfgn).map_err(s)?;
        let mut rhs = 0.0;
        for i in 0..=2usize {
            let mut partial = h.clone();
            for _ in i..2 {
                partial = integrate_last(&space, &partial)?;
            }
            rhs += binomial(2, i) * multiple_integral_eval(&space, &partial, &cfgn).map_err(s)?;
        }
        ensure((u - rhs).abs() <= 1e-7 * (1.0 + u.abs()), format!("{u} vs {rhs}"))?;
    }
    Ok(())
}

fn integrate_last(space: &MeasureSpace, f: &Kernel) -> Result<Kernel, String> {
    let q = f.order();
    let mut out = Vec::new();
    for t in f.terms().ok_or("separable only")? {
        let coeff = t.coeff * space.integral(&t.factors[q - 1]).map_err(s)?;
        if coeff != 0.0 {
            out.push(Term { coeff, factors: t.factors[..q - 1].to_vec() });
        }
    }
    Ok(Kernel::separable(q - 1, out))
}

fn check_carre(seed: u64) -> Result<(), String> {
    let pts: Vec<f64> = (0..10).map(|i| -0.9 + 0.2 * i as f64).collect();
    let space = MeasureSpace::grid_1d(pts, vec![0.2 * 0.5; 10], 5.0).unwrap();
    let f = Kernel::rank_one(2, 0.3, crate::builtins::sign_factor());
    let carre = carre_expansion(&space, &f).map_err(s)?;
    let weights: Vec<f64> = space.grid_weights().unwrap().to_vec();
    let mut rng = derive_stream(seed, "identity/carre", 0);
    for _ in 0..200 {
        let cfgn = sample(&space, &mut rng);
        let mut lhs = 0.0;
        for (a, &w) in weights.iter().enumerate() {
            let z = space.atom_coord(a).to_vec();
            let d = derivative_eval(&space, &f, &cfgn, &z).map_err(s)?;
            lhs += space.intensity() * w * d * d;
        }
        lhs /= 2.0;
        let rhs = chaos_eval(&space, &carre, &cfgn).map_err(s)?;
        ensure((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), format!("{lhs} vs {rhs}"))?;
    }
    Ok(())
}

fn check_isometry(seed: u64) -> Result<(), String> {
    let (space, f) = sign_kernel(6.0);
    let plan = PathwisePlan::new(&space, &f).map_err(s)?;
    let mut rng = derive_stream(seed, "identity/isometry", 0);
    let reps = 20_000;
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    let mut buf = PoissonSample::default();
    for _ in 0..reps {
        sample_into(&space, &mut rng, &mut buf);
        let v = plan.integral(&buf).map_err(s)?;
        s1 += v;
        s2 += v * v;
        s4 += v.powi(4);
    }
    let r = reps as f64;
    let mean = s1 / r;
    let m2 = s2 / r;
    let expect = 2.0 * norm2(&space, &f).map_err(s)?;
    let se_mean = (m2 / r).sqrt();
    let se_m2 = ((s4 / r - m2 * m2).max(0.0) / r).sqrt();
    ensure(mean.abs() <= 3.0 * se_mean, format!("mean {mean}"))?;
    ensure((m2 - expect).abs() <= 3.0 * se_m2, format!("m2 {m2} vs {expect}"))
}

fn check_ustat_oracle(seed: u64) -> Result<(), String> {
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 12.0).unwrap();
    let e = crate::builtins::sign_factor();
    let x = Factor::poly(PiecewisePoly::poly(-1.0, 1.0, vec![0.0, 1.0]));
    let h = Kernel::separable(
        2,
        vec![
            Term { coeff: 1.0, factors: vec![e.clone(), e.clone()] },
            Term { coeff: 0.5, factors: vec![e.clone(), x.clone()] },
            Term { coeff: 0.5, factors: vec![x, e] },
        ],
    );
    let mut rng = derive_stream(seed, "identity/ustat-oracle", 0);
    for _ in 0..60 {
        let cfgn = sample(&space, &mut rng);
        if cfgn.count() > 50 {
            continue;
        }
        let fast = ustat_eval(&space, &h, &cfgn).map_err(s)?;
        let slow = ustat_direct(&space, &h, &cfgn).map_err(s)?;
        ensure((fast - slow).abs() <= 1e-9 * (1.0 + slow.abs()), "rank form vs direct")?;
    }
    Ok(())
}

fn check_disk_oracle(seed: u64) -> Result<(), String> {
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 50.0).unwrap();
    let mut rng = derive_stream(seed, "identity/disk", 0);
    for rep in 0..20 {
        let cfgn = sample(&space, &mut rng);
        let r = 0.02 + 0.01 * (rep % 5) as f64;
        for p in [disk::Pattern::Edge, disk::Pattern::Triangle, disk::Pattern::Path3] {
            let fast = disk::disk_graph_stat(&cfgn, r, p);
            let slow = disk::disk_graph_stat_direct(&cfgn, r, p);
            ensure(fast == slow, format!("{p:?} at r={r}: {fast} vs {slow}"))?;
        }
    }
    Ok(())
}

fn check_repro(seed: u64) -> Result<(), String> {
    let space = MeasureSpace::uniform_1d(0.0, 1.0, 1.0, 30.0).unwrap();
    let mut a = derive_stream(seed, "identity/repro", 1);
    let mut b = derive_stream(seed, "identity/repro", 1);
    let sa = sample(&space, &mut a);
    let sb = sample(&space, &mut b);
    ensure(sa.count() == sb.count(), "counts differ")?;
    for i in 0..sa.sites() {
        ensure(sa.site(i) == sb.site(i), "points differ")?;
    }
    Ok(())
}
