//! Acceptance suite: one test per criterion, each printing a summary line.
//!
//! Tolerances and thresholds are pinned in the asserts. Monte Carlo
//! criteria use fixed seeds, so outcomes are deterministic.

use pchaos_cli::builtins::{self, default_config};
use pchaos_cli::config::StudyId;
use pchaos_cli::csvout::Row;
use pchaos_cli::ratefit::fit_rate;
use pchaos_cli::runner::execute;
use pchaos_cli::studies::{run_study, simulate_integrals};

use pchaos_core::bounds::{
    carre_expansion, dejong_report, fourth_moment_i2, third_moment_i2,
};
use pchaos_core::chaos_sim::{
    chaos_eval, derivative_eval, multiple_integral_eval, sample, sample_point, ustat_eval,
};
use pchaos_core::contract::{
    binomial, c_q_constant, contract, contraction_norm, norm2, product_kernel, sym_contract,
};
use pchaos_core::rng::derive_stream;
use pchaos_core::space::{ChaosExpansion, Factor, Kernel, MeasureSpace, Term};
use pchaos_core::stein_gamma::{GammaTarget, SteinSolution, TestFunction};

const SEED: u64 = 20_260_809;

fn random_sym_kernel(idx: u64, terms: usize) -> (MeasureSpace, Kernel) {
    use rand::Rng;
    let mut rng = derive_stream(SEED, "acceptance/random-kernel", idx);
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

fn sign_pair_kernel(n: f64) -> (MeasureSpace, Kernel) {
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, n).unwrap();
    (space, Kernel::rank_one(2, 1.0 / n, builtins::sign_factor()))
}

/// Criterion 1 — exact algebra suite.
#[test]
fn c1_exact_algebra() {
    // square-norm identity: 4!·‖f⋆̃₀⁰f‖² = 2(2‖f‖²)² + 16‖f⋆₁¹f‖²,
    // 50 random separable order-2 kernels, relative 1e-10.
    for idx in 0..50 {
        let (space, f) = random_sym_kernel(idx, 3);
        let t00 = sym_contract(&space, &f, &f, 0, 0).unwrap();
        let lhs = 24.0 * norm2(&space, &t00).unwrap();
        let n2 = norm2(&space, &f).unwrap();
        let c11 = contraction_norm(&space, &f, 1, 1).unwrap();
        let rhs = 2.0 * (2.0 * n2) * (2.0 * n2) + 16.0 * c11 * c11;
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs), "kernel {idx}: {lhs} vs {rhs}");
    }

    // middle-contraction constants, exact.
    assert_eq!(c_q_constant(2).unwrap(), 1.0);
    assert_eq!(c_q_constant(4).unwrap(), 1.0 / 18.0);

    // ‖f⋆ₐ⁰f‖ = ‖f⋆_q^{q−a}f‖ for q ∈ {2, 4}, a ∈ 2..=q, relative 1e-10.
    let (space2, f2) = random_sym_kernel(1000, 3);
    for a in 2..=2usize {
        let lhs = contraction_norm(&space2, &f2, a, 0).unwrap();
        let rhs = contraction_norm(&space2, &f2, 2, 2 - a).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
    }
    let space4 = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 1.0).unwrap();
    let f4 = Kernel::rank_sum(
        4,
        vec![(1.0, Factor::step(-1.0, 0.3, 0.8)), (0.5, Factor::step(-0.2, 1.0, -0.6))],
    );
    for a in 2..=4usize {
        let lhs = contraction_norm(&space4, &f4, a, 0).unwrap();
        let rhs = contraction_norm(&space4, &f4, 4, 4 - a).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs), "q=4, a={a}");
    }

    // Gamma target moments vs quadrature of the density, relative 1e-6.
    for &nu in &[0.5, 1.0, 2.0, 5.0] {
        let t = GammaTarget::new(nu).unwrap();
        for k in 1..=4usize {
            let q = t.integrate_against_density(|x| x.powi(k as i32)).unwrap();
            let exact = t.moment(k).unwrap();
            assert!(
                (q - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                "nu={nu} k={k}: {q} vs {exact}"
            );
        }
    }

    // Stein-equation residual ≤ 1e-6 on a 200-point grid, every dictionary
    // member, ν ∈ {1, 2}; the independent derivative is a central finite
    // difference of the quadrature-computed solution.
    for &nu in &[1.0, 2.0] {
        let t = GammaTarget::new(nu).unwrap();
        for h in TestFunction::dictionary() {
            let u = SteinSolution::new(t, &h).unwrap();
            let eh = u.expectation();
            let fd = 1e-3;
            for i in 0..200 {
                let x = -nu + 0.01 + i as f64 * (nu + 10.0) / 200.0;
                let du = (u.value(x + fd).unwrap() - u.value(x - fd).unwrap()) / (2.0 * fd);
                let resid = h.value(x) - eh - (2.0 * (x + nu) * du - x * u.value(x).unwrap());
                assert!(resid.abs() <= 1e-6, "{} nu={nu} x={x}: {resid:e}", h.id);
            }
        }
    }
    eprintln!("criterion 1 (exact algebra suite): PASS");
}

/// Criterion 2 — pathwise identity suite, 10³ replications each.
#[test]
fn c2_pathwise_identities() {
    let (space, f) = sign_pair_kernel(8.0);

    // product formula I₂(f)² = Σ_p I_p(G_p² f), relative 1e-7
    let mut exp = ChaosExpansion::constant_only(
        product_kernel(&space, &f, 0).unwrap().scalar_value(),
    );
    for p in 1..=4usize {
        exp.insert(p, product_kernel(&space, &f, p).unwrap());
    }
    let mut rng = derive_stream(SEED, "acceptance/product-formula", 0);
    for _ in 0..1000 {
        let s = sample(&space, &mut rng);
        let lhs = multiple_integral_eval(&space, &f, &s).unwrap().powi(2);
        let rhs = chaos_eval(&space, &exp, &s).unwrap();
        assert!((lhs - rhs).abs() <= 1e-7 * (1.0 + lhs), "{lhs} vs {rhs}");
    }

    // add-one cost D_zF = F(η+δ_z) − F(η), relative 1e-8
    let mut rng = derive_stream(SEED, "acceptance/add-one", 0);
    for _ in 0..1000 {
        let s = sample(&space, &mut rng);
        let z = [sample_point(&space, &mut rng)];
        let d = derivative_eval(&space, &f, &s, &z).unwrap();
        let before = multiple_integral_eval(&space, &f, &s).unwrap();
        let mut aug = s.clone();
        aug.push(&z, 1, None);
        let oracle = multiple_integral_eval(&space, &f, &aug).unwrap() - before;
        assert!((d - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()));
    }

    // chaos decomposition of a k=2 Poissonized U-statistic, relative 1e-7
    let h = Kernel::rank_one(2, 1.0, Factor::step(-0.3, 0.8, 1.2));
    let integrate_last = |k: &Kernel| -> Kernel {
        let q = k.order();
        let mut out = Vec::new();
        for t in k.terms().unwrap() {
            let coeff = t.coeff * space.integral(&t.factors[q - 1]).unwrap();
            if coeff != 0.0 {
                out.push(Term { coeff, factors: t.factors[..q - 1].to_vec() });
            }
        }
        Kernel::separable(q - 1, out)
    };
    let mut rng = derive_stream(SEED, "acceptance/lp", 0);
    for _ in 0..1000 {
        let s = sample(&space, &mut rng);
        let u = ustat_eval(&space, &h, &s).unwrap();
        let mut rhs = 0.0;
        for i in 0..=2usize {
            let mut partial = h.clone();
            for _ in i..2 {
                partial = integrate_last(&partial);
            }
            rhs += binomial(2, i) * multiple_integral_eval(&space, &partial, &s).unwrap();
        }
        assert!((u - rhs).abs() <= 1e-7 * (1.0 + u.abs()), "{u} vs {rhs}");
    }

    // carré identity: pathwise q⁻¹‖DF‖² vs the evaluated expansion, 1e-8
    let pts: Vec<f64> = (0..10).map(|i| -0.9 + 0.2 * i as f64).collect();
    let gspace = MeasureSpace::grid_1d(pts, vec![0.2 * 0.5; 10], 5.0).unwrap();
    let gf = Kernel::rank_one(2, 0.4, builtins::sign_factor());
    let carre = carre_expansion(&gspace, &gf).unwrap();
    let weights: Vec<f64> = gspace.grid_weights().unwrap().to_vec();
    let mut rng = derive_stream(SEED, "acceptance/carre", 0);
    for _ in 0..1000 {
        let s = sample(&gspace, &mut rng);
        let mut lhs = 0.0;
        for (a, &w) in weights.iter().enumerate() {
            let z = gspace.atom_coord(a).to_vec();
            let d = derivative_eval(&gspace, &gf, &s, &z).unwrap();
            lhs += gspace.intensity() * w * d * d;
        }
        lhs /= 2.0;
        let rhs = chaos_eval(&gspace, &carre, &s).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
    eprintln!("criterion 2 (pathwise identity suite): PASS");
}

/// Criterion 3 — Monte Carlo moments vs the exact oracles at 10⁶
/// replications for three built-in kernels, within 3 standard errors.
#[test]
fn c3_moment_oracles() {
    let n = 15.0;
    let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, n).unwrap();
    let a = Factor::step(-1.0, 0.2, 1.3);
    let b = Factor::step(-0.5, 1.0, -0.8);
    let kernels: Vec<(&str, Kernel)> = vec![
        ("sign-pair", Kernel::rank_one(2, 1.0 / n, builtins::sign_factor())),
        (
            "two-rank",
            Kernel::rank_sum(2, vec![(1.0 / n, a.clone()), (0.7 / n, b.clone())]),
        ),
        (
            "mixed-sym",
            Kernel::separable(
                2,
                vec![
                    Term { coeff: 0.5 / n, factors: vec![a.clone(), b.clone()] },
                    Term { coeff: 0.5 / n, factors: vec![b, a] },
                ],
            ),
        ),
    ];
    for (name, f) in &kernels {
        let m2_exact = 2.0 * norm2(&space, f).unwrap();
        let m3_exact = third_moment_i2(&space, f).unwrap();
        let m4_exact = fourth_moment_i2(&space, f).unwrap();
        let reps = 1_000_000usize;
        let vals =
            simulate_integrals(&space, f, reps, SEED, &format!("acceptance/moments/{name}"))
                .unwrap();
        let r = reps as f64;
        let mean = |k: u32| vals.iter().map(|v| v.powi(k as i32)).sum::<f64>() / r;
        let (mc2, mc3, mc4) = (mean(2), mean(3), mean(4));
        let se = |k: u32, m: f64| ((mean(2 * k) - m * m).max(0.0) / r).sqrt();
        assert!(
            (mc2 - m2_exact).abs() <= 3.0 * se(2, mc2),
            "{name} m2: {mc2} vs {m2_exact}"
        );
        assert!(
            (mc3 - m3_exact).abs() <= 3.0 * se(3, mc3),
            "{name} m3: {mc3} vs {m3_exact}"
        );
        assert!(
            (mc4 - m4_exact).abs() <= 3.0 * se(4, mc4),
            "{name} m4: {mc4} vs {m4_exact}"
        );
    }
    eprintln!("criterion 3 (moment-oracle suite): PASS");
}

fn rows_of(study: StudyId) -> Vec<Row> {
    run_study(&default_config(study)).unwrap().rows
}

/// Criterion 4 — de Jong / Gamma rate study on the pinned schedule.
#[test]
fn c4_gamma_rate_study() {
    let rows = rows_of(StudyId::GammaUstat);
    assert_eq!(rows.len(), 5);
    let mut failures: Vec<String> = Vec::new();

    let cn_pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.n, r.cn.unwrap())).collect();
    let (slope, _) = fit_rate(&cn_pairs).unwrap();
    if !(-0.26..=-0.24).contains(&slope) {
        failures.push(format!("Cn slope {slope} outside [-0.26, -0.24]"));
    }
    for r in &rows {
        if r.variance_gap.unwrap() > 1e-12 {
            failures.push(format!("variance gap {} at n={}", r.variance_gap.unwrap(), r.n));
        }
        if r.middle_defect.unwrap() > 1e-12 {
            failures.push(format!("middle defect {} at n={}", r.middle_defect.unwrap(), r.n));
        }
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.kolmogorov.unwrap()).collect();
    for w in ks.windows(2) {
        if !(w[1] < w[0]) {
            failures.push(format!("Kolmogorov distances not strictly decreasing: {ks:?}"));
            break;
        }
    }
    let last = *ks.last().unwrap();
    if !(last <= 0.02) {
        failures.push(format!(
            "Kolmogorov distance at n=25600 is {last:.4}, above the 0.02 cap \
             (the Poissonized statistic keeps ≈0.33·n^(-1/4) of its mass at or \
             below −ν, ≈0.026 at this n; see the decisions ledger)"
        ));
    }
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    eprintln!(
        "criterion 4 (Gamma rate study): {status} — Cn slope {slope:.4}, KS sequence {ks:?}"
    );
    assert!(failures.is_empty(), "{}", failures.join("; "));
}

/// Criterion 5 — three-moment criterion: exact decay for the tuned family,
/// a positive floor for the variance-matched detuned family.
#[test]
fn c5_three_moment() {
    let rows = rows_of(StudyId::ThreeMoment);
    let tuned: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.kernel == "tuned-pair")
        .map(|r| (r.n, r.three_moment_residual.unwrap()))
        .collect();
    let (slope, _) = fit_rate(&tuned).unwrap();
    assert!(slope <= -0.4, "tuned-family residual slope {slope} > -0.4");
    let floor = rows
        .iter()
        .filter(|r| r.kernel == "detuned-pair")
        .map(|r| r.three_moment_residual.unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(floor > 1.0, "detuned-family residual floor {floor} not bounded away from 0");
    eprintln!(
        "criterion 5 (three-moment criterion): PASS — tuned slope {slope:.3}, detuned floor {floor:.2}"
    );
}

/// Criterion 6 — fourth-moment-to-Normal contrast.
#[test]
fn c6_normal_contrast() {
    let rows = rows_of(StudyId::DejongNormal);
    let bn: Vec<(f64, f64)> = rows.iter().map(|r| (r.n, r.bn.unwrap())).collect();
    let (slope, _) = fit_rate(&bn).unwrap();
    assert!(slope < -0.1, "Bn slope {slope} not < -0.1");
    let last_ks = rows.last().unwrap().kolmogorov.unwrap();
    assert!(last_ks <= 0.02, "Normal Kolmogorov distance {last_ks} > 0.02");

    // The Gamma-limit kernel keeps Bn bounded below (it violates the
    // fourth-moment condition): exact computation along the same schedule.
    for &n in &[100.0, 400.0, 1600.0, 6400.0, 25600.0] {
        let (space, h) = sign_pair_kernel(n);
        let rep = dejong_report(&space, &h, Some(1.0)).unwrap();
        let bn = rep.bn.unwrap();
        assert!(bn >= 0.3, "Gamma-kernel Bn {bn} < 0.3 at n={n}");
    }
    eprintln!("criterion 6 (Normal contrast): PASS — Bn slope {slope:.3}, last KS {last_ks:.4}");
}

fn check_hybrid(rows: &[Row], label: &str) {
    let last = rows.last().unwrap();
    let ks_a = last.kolmogorov.unwrap();
    let ks_b = last.kolmogorov_b.unwrap();
    assert!(ks_a <= 0.03, "{label}: first marginal KS {ks_a} > 0.03");
    assert!(ks_b <= 0.03, "{label}: second marginal KS {ks_b} > 0.03");
    for r in rows {
        let corr = r.cross_corr.unwrap();
        let se3 = 3.0 / (r.replications as f64).sqrt();
        assert!(corr.abs() <= se3, "{label}: |corr| {corr} > 3 SE {se3} at n={}", r.n);
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.product_gap.unwrap()).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{label}: product gap not decreasing: {gaps:?}");
    }
}

/// Criterion 7a — Gamma/Normal hybrid study.
#[test]
fn c7_hybrid_gamma_normal() {
    let rows = rows_of(StudyId::HybridGn);
    check_hybrid(&rows, "hybrid-gn");
    // the Normal-leg contraction condition holds along the schedule
    let cmax: Vec<f64> = rows.iter().map(|r| r.contraction_max.unwrap()).collect();
    for w in cmax.windows(2) {
        assert!(w[1] < w[0], "normal-leg contractions not vanishing: {cmax:?}");
    }
    eprintln!("criterion 7 (hybrid Gamma/Normal): PASS");
}

/// Criterion 7b — Gamma/Poisson hybrid study.
#[test]
fn c7_hybrid_gamma_poisson() {
    let rows = rows_of(StudyId::HybridGp);
    check_hybrid(&rows, "hybrid-gp");
    // the add-one-cost energy of the count stays bounded along the schedule
    for r in &rows {
        assert!(r.dz2_diag.unwrap() <= 10.0, "dz2 diagnostic {:?} at n={}", r.dz2_diag, r.n);
    }
    eprintln!("criterion 7 (hybrid Gamma/Poisson): PASS");
}

/// Criterion 8 — determinism: identical config + seed reproduce every CSV
/// numeric field (byte-identical artifacts).
#[test]
fn c8_determinism() {
    let mut cfg = default_config(StudyId::GammaUstat);
    cfg.n_schedule = vec![50.0, 100.0, 200.0];
    cfg.replications = 500;
    let a = execute(&cfg, None).unwrap();
    let b = execute(&cfg, None).unwrap();
    assert_eq!(a.csv, b.csv, "gamma-ustat CSV not reproducible");
    assert_eq!(a.rate_files, b.rate_files);

    let mut cfg = default_config(StudyId::HybridGp);
    cfg.n_schedule = vec![50.0, 100.0];
    cfg.replications = 200;
    let a = execute(&cfg, None).unwrap();
    let b = execute(&cfg, None).unwrap();
    assert_eq!(a.csv, b.csv, "hybrid-gp CSV not reproducible");
    eprintln!("criterion 8 (determinism): PASS");
}
