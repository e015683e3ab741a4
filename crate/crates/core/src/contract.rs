//! Contraction-kernel algebra.
//!
//! For symmetric kernels f, g of order q, the contraction `f ⋆_r^l g`
//! identifies the first r arguments of the two copies and integrates out the
//! first l of them against μ_n. Separable inputs stay separable: every
//! integration becomes a Gram product of factors and every identification a
//! pointwise factor product, so the whole algebra is exact up to floating
//! error. Dense-grid inputs contract by weighted tensor sums.
//!
//! Argument layout of the result (order 2q−r−l) follows the definition:
//! first the r−l identified-but-not-integrated variables, then the q−r free
//! variables of f, then the q−r free variables of g.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::space::{permute_all, supports_disjoint, Factor, Kernel, KernelRepr, MeasureSpace, Term};
use crate::Result;

/// Symmetrisation expands q!-many terms; beyond this order it is refused.
pub const SYM_ORDER_CAP: usize = 8;

// ---------------------------------------------------------------------------
// Shared factorial / binomial table
// ---------------------------------------------------------------------------

/// n! as f64 (exact for n ≤ 22).
pub fn factorial(n: usize) -> f64 {
    let mut v = 1.0;
    for k in 2..=n {
        v *= k as f64;
    }
    v
}

/// Binomial coefficient C(n, k) as f64; 0 outside the triangle.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    libm_round(v)
}

// Binomials of moderate size are integers; round away the division noise.
fn libm_round(v: f64) -> f64 {
    if v < 1e15 {
        let r = (v + 0.5) as u64;
        r as f64
    } else {
        v
    }
}

// ---------------------------------------------------------------------------
// Contraction
// ---------------------------------------------------------------------------

/// The (un-symmetrised) contraction kernel `f ⋆_r^l g` of two order-q
/// kernels, all integrations under μ_n. The result has order 2q−r−l; when
/// that is 0 the result is a scalar kernel.
pub fn contract(
    space: &MeasureSpace,
    f: &Kernel,
    g: &Kernel,
    r: usize,
    l: usize,
) -> Result<Kernel> {
    let q = f.order();
    if g.order() != q {
        return Err(Error::OrderMismatch { left: q, right: g.order() });
    }
    if l > r || r > q {
        return Err(Error::ContractionRange { q, r, l });
    }
    match (f.repr(), g.repr()) {
        (KernelRepr::Separable(ta), KernelRepr::Separable(tb)) => {
            separable_contract(space, ta, tb, q, r, l)
        }
        _ => {
            let fa = f.to_dense(space)?;
            let fb = g.to_dense(space)?;
            dense_contract(space, &fa, &fb, q, r, l)
        }
    }
}

fn separable_contract(
    space: &MeasureSpace,
    ta: &[Term],
    tb: &[Term],
    q: usize,
    r: usize,
    l: usize,
) -> Result<Kernel> {
    let out_order = 2 * q - r - l;
    let mut terms: Vec<Term> = Vec::new();
    let mut visit = |a: &Term, b: &Term| -> Result<()> {
        let mut coeff = a.coeff * b.coeff;
        if coeff == 0.0 {
            return Ok(());
        }
        // Integrated identifications -> Gram scalars.
        for i in 0..l {
            coeff *= space.gram(&a.factors[i], &b.factors[i])?;
            if coeff == 0.0 {
                return Ok(());
            }
        }
        // Identified-but-kept variables -> pointwise products.
        let mut factors: Vec<Factor> = Vec::with_capacity(out_order);
        for i in l..r {
            if supports_disjoint(&a.factors[i], &b.factors[i]) {
                return Ok(());
            }
            let prod = a.factors[i].mul(&b.factors[i], space)?;
            if prod.is_zero() {
                return Ok(());
            }
            factors.push(prod);
        }
        factors.extend_from_slice(&a.factors[r..]);
        factors.extend_from_slice(&b.factors[r..]);
        terms.push(Term { coeff, factors });
        Ok(())
    };
    // Pairing the first slot (integrated when l ≥ 1, a pointwise product
    // when r ≥ 1) kills every pair with disjoint slot-0 supports, so the
    // interval sweep applies whenever the slot participates.
    let swept = r >= 1 && sweep_pairs(ta, tb, &mut |i, j| visit(&ta[i], &tb[j]))?;
    if !swept {
        for a in ta {
            for b in tb {
                visit(a, b)?;
            }
        }
    }
    let mut k = Kernel::separable(out_order, terms);
    k.prune();
    Ok(k)
}

/// Visit the (i, j) pairs whose first-factor supports overlap on a set of
/// positive measure, via a line sweep: O(T log T + pairs) instead of T².
/// Returns false (visiting nothing) when interval supports are unavailable
/// and the caller must fall back to the full double loop.
fn sweep_pairs<F: FnMut(usize, usize) -> Result<()>>(
    ta: &[Term],
    tb: &[Term],
    visit: &mut F,
) -> Result<bool> {
    // events: (coordinate, kind); closes sort before opens at equal
    // coordinates so intervals touching only at an endpoint never pair.
    const CLOSE_A: u8 = 0;
    const CLOSE_B: u8 = 1;
    const OPEN_A: u8 = 2;
    const OPEN_B: u8 = 3;
    let mut events: Vec<(f64, u8, u32)> = Vec::with_capacity(2 * (ta.len() + tb.len()));
    for (side, terms) in [(OPEN_A, ta), (OPEN_B, tb)] {
        for (i, t) in terms.iter().enumerate() {
            let Some((lo, hi)) = t.factors.first().and_then(Factor::support) else {
                return Ok(false);
            };
            events.push((lo, side, i as u32));
            events.push((hi, side - 2, i as u32));
        }
    }
    events.sort_by(|x, y| {
        x.0.partial_cmp(&y.0).expect("finite supports").then(x.1.cmp(&y.1))
    });
    let mut active_a: Vec<u32> = Vec::new();
    let mut active_b: Vec<u32> = Vec::new();
    let mut pos_a = vec![u32::MAX; ta.len()];
    let mut pos_b = vec![u32::MAX; tb.len()];
    for (_, kind, idx) in events {
        let i = idx as usize;
        match kind {
            OPEN_A => {
                for &j in &active_b {
                    visit(i, j as usize)?;
                }
                pos_a[i] = active_a.len() as u32;
                active_a.push(idx);
            }
            OPEN_B => {
                for &j in &active_a {
                    visit(j as usize, i)?;
                }
                pos_b[i] = active_b.len() as u32;
                active_b.push(idx);
            }
            kind if kind == CLOSE_A => {
                let p = pos_a[i] as usize;
                let last = *active_a.last().expect("balanced events");
                active_a.swap_remove(p);
                if p < active_a.len() {
                    pos_a[last as usize] = p as u32;
                }
            }
            _ => {
                debug_assert_eq!(kind, CLOSE_B);
                let p = pos_b[i] as usize;
                let last = *active_b.last().expect("balanced events");
                active_b.swap_remove(p);
                if p < active_b.len() {
                    pos_b[last as usize] = p as u32;
                }
            }
        }
    }
    Ok(true)
}

fn dense_contract(
    space: &MeasureSpace,
    f: &Kernel,
    g: &Kernel,
    q: usize,
    r: usize,
    l: usize,
) -> Result<Kernel> {
    let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
    let n = space.intensity();
    let w: Vec<f64> = space.grid_weights().unwrap().iter().map(|&x| n * x).collect();
    let (KernelRepr::DenseGrid(da), KernelRepr::DenseGrid(db)) = (f.repr(), g.repr()) else {
        unreachable!()
    };
    let out_order = 2 * q - r - l;
    let free = q - r;
    let mut out = vec![0.0; atoms.pow(out_order as u32)];
    // Multi-index loops: out[gamma, t, s] = sum_z prod w(z) f[z,gamma,t] g[z,gamma,s]
    let mut gamma = vec![0usize; r - l];
    loop {
        let mut t = vec![0usize; free];
        loop {
            let mut s = vec![0usize; free];
            loop {
                let mut acc = 0.0;
                let mut z = vec![0usize; l];
                loop {
                    let mut wz = 1.0;
                    for &zi in &z {
                        wz *= w[zi];
                    }
                    if wz != 0.0 {
                        let ia = flat_index(atoms, &[&z, &gamma, &t]);
                        let ib = flat_index(atoms, &[&z, &gamma, &s]);
                        acc += wz * da[ia] * db[ib];
                    }
                    if !advance(&mut z, atoms) {
                        break;
                    }
                }
                let io = flat_index(atoms, &[&gamma, &t, &s]);
                out[io] = acc;
                if !advance(&mut s, atoms) {
                    break;
                }
            }
            if !advance(&mut t, atoms) {
                break;
            }
        }
        if !advance(&mut gamma, atoms) {
            break;
        }
    }
    Kernel::dense_grid(out_order, out, space)
}

fn flat_index(atoms: usize, groups: &[&[usize]]) -> usize {
    let mut idx = 0;
    for g in groups {
        for &i in *g {
            idx = idx * atoms + i;
        }
    }
    idx
}

/// Advance a little-endian multi-index; false when it wraps to zero.
fn advance(idx: &mut [usize], base: usize) -> bool {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

// ---------------------------------------------------------------------------
// Symmetrisation
// ---------------------------------------------------------------------------

/// Canonical symmetrisation: average over all argument permutations.
/// Idempotent; separable inputs expand into order!-many terms.
pub fn symmetrize(space: &MeasureSpace, f: &Kernel) -> Result<Kernel> {
    let q = f.order();
    if q <= 1 {
        return Ok(f.clone());
    }
    if q > SYM_ORDER_CAP {
        return Err(Error::OrderCapExceeded { q, cap: SYM_ORDER_CAP });
    }
    match f.repr() {
        KernelRepr::Separable(terms) => {
            let fact = factorial(q);
            let mut out: Vec<Term> = Vec::with_capacity(terms.len() * fact as usize);
            let mut perm: Vec<usize> = (0..q).collect();
            for t in terms {
                let coeff = t.coeff / fact;
                permute_all(&mut perm, &mut |p| {
                    let factors = p.iter().map(|&i| t.factors[i].clone()).collect();
                    out.push(Term { coeff, factors });
                });
            }
            let mut k = Kernel::separable(q, out);
            k.prune();
            Ok(k)
        }
        KernelRepr::DenseGrid(data) => {
            let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
            let fact = factorial(q);
            let mut out = vec![0.0; data.len()];
            let mut perm: Vec<usize> = (0..q).collect();
            let mut digits = vec![0usize; q];
            for (flat, slot) in out.iter_mut().enumerate() {
                let mut rem = flat;
                for a in (0..q).rev() {
                    digits[a] = rem % atoms;
                    rem /= atoms;
                }
                let mut acc = 0.0;
                permute_all(&mut perm, &mut |p| {
                    let mut idx = 0;
                    for &a in p {
                        idx = idx * atoms + digits[a];
                    }
                    acc += data[idx];
                });
                *slot = acc / fact;
            }
            Kernel::dense_grid(q, out, space)
        }
    }
}

/// Symmetrised contraction `f ⋆̃_r^l g`.
pub fn sym_contract(
    space: &MeasureSpace,
    f: &Kernel,
    g: &Kernel,
    r: usize,
    l: usize,
) -> Result<Kernel> {
    let c = contract(space, f, g, r, l)?;
    symmetrize(space, &c)
}

// ---------------------------------------------------------------------------
// Norms and inner products
// ---------------------------------------------------------------------------

/// ⟨f, g⟩ = ∫ f·g dμ_n^q.
pub fn inner(space: &MeasureSpace, f: &Kernel, g: &Kernel) -> Result<f64> {
    let q = f.order();
    if g.order() != q {
        return Err(Error::OrderMismatch { left: q, right: g.order() });
    }
    if q == 0 {
        return Ok(f.scalar_value() * g.scalar_value());
    }
    match (f.repr(), g.repr()) {
        (KernelRepr::Separable(ta), KernelRepr::Separable(tb)) => {
            let mut total = 0.0;
            let mut visit = |a: &Term, b: &Term| -> Result<()> {
                let mut prod = a.coeff * b.coeff;
                for (ga, gb) in a.factors.iter().zip(&b.factors) {
                    if prod == 0.0 {
                        break;
                    }
                    prod *= space.gram(ga, gb)?;
                }
                total += prod;
                Ok(())
            };
            if !sweep_pairs(ta, tb, &mut |i, j| visit(&ta[i], &tb[j]))? {
                for a in ta {
                    for b in tb {
                        visit(a, b)?;
                    }
                }
            }
            Ok(total)
        }
        _ => {
            let fa = f.to_dense(space)?;
            let fb = g.to_dense(space)?;
            let (KernelRepr::DenseGrid(da), KernelRepr::DenseGrid(db)) = (fa.repr(), fb.repr())
            else {
                unreachable!()
            };
            let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
            let n = space.intensity();
            let w: Vec<f64> = space.grid_weights().unwrap().iter().map(|&x| n * x).collect();
            let mut idx = vec![0usize; q];
            let mut total = 0.0;
            let mut flat = 0usize;
            loop {
                let mut wz = 1.0;
                for &i in &idx {
                    wz *= w[i];
                }
                total += wz * da[flat] * db[flat];
                if !advance(&mut idx, atoms) {
                    break;
                }
                flat += 1;
            }
            Ok(total)
        }
    }
}

/// ‖f‖² = ∫ f² dμ_n^q (clamped at 0 against cancellation noise).
pub fn norm2(space: &MeasureSpace, f: &Kernel) -> Result<f64> {
    Ok(inner(space, f, f)?.max(0.0))
}

/// ‖f‖.
pub fn norm(space: &MeasureSpace, f: &Kernel) -> Result<f64> {
    Ok(sqrt(norm2(space, f)?))
}

/// ‖f ⋆_r^l f‖ — the workhorse of every bound.
pub fn contraction_norm(space: &MeasureSpace, f: &Kernel, r: usize, l: usize) -> Result<f64> {
    let c = contract(space, f, f, r, l)?;
    norm(space, &c)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    num_traits::Float::sqrt(x)
}

// ---------------------------------------------------------------------------
// Product formula
// ---------------------------------------------------------------------------

/// The product-formula kernel `G_p^q f` with
/// `I_q(f)² = Σ_{p=0}^{2q} I_p(G_p^q f)`;
/// `G_0^q f = q!·‖f‖²` (a scalar) and for p ≥ 1
/// `G_p^q f = Σ_{2q−r−l=p} r!·C(q,r)²·C(r,l)·(f ⋆̃_r^l f)`.
pub fn product_kernel(space: &MeasureSpace, f: &Kernel, p: usize) -> Result<Kernel> {
    let q = f.order();
    if p > 2 * q {
        return Err(Error::ProductOrderRange { q, p });
    }
    if p == 0 {
        return Ok(Kernel::scalar(factorial(q) * norm2(space, f)?));
    }
    let mut out = Kernel::zero(p);
    for r in 0..=q {
        for l in 0..=r {
            if 2 * q - r - l != p {
                continue;
            }
            let coeff = factorial(r) * binomial(q, r) * binomial(q, r) * binomial(r, l);
            let term = sym_contract(space, f, f, r, l)?;
            out = out.add(&term.scale(coeff), space)?;
        }
    }
    let mut out = out;
    out.prune();
    Ok(out)
}

/// The constant `c_q = 4 / ((q/2)!·C(q, q/2)²)` from the middle-contraction
/// condition; defined for even q ≥ 2 (odd orders are out of scope).
pub fn c_q_constant(q: usize) -> Result<f64> {
    if q < 2 || q % 2 != 0 {
        return Err(Error::OddOrder { q });
    }
    let half = q / 2;
    Ok(4.0 / (factorial(half) * binomial(q, half) * binomial(q, half)))
}

/// ‖ f ⋆̃_{q/2}^{q/2} f − c_q·f ‖ — zero exactly at the Gamma fixed point.
pub fn middle_contraction_defect(space: &MeasureSpace, f: &Kernel) -> Result<f64> {
    let q = f.order();
    let cq = c_q_constant(q)?;
    let mid = sym_contract(space, f, f, q / 2, q / 2)?;
    let diff = mid.add(&f.scale(-cq), space)?;
    norm(space, &diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::PiecewisePoly;
    use alloc::sync::Arc;

    fn two_atom_space() -> MeasureSpace {
        MeasureSpace::grid_1d(vec![0.0, 1.0], vec![1.0, 1.0], 1.0).unwrap()
    }

    fn e_indicator_atom0() -> Factor {
        Factor::indicator(-0.5, 0.5)
    }

    /// Random symmetric separable order-2 kernel on a uniform continuum space.
    fn random_sym_kernel(seed: u64, terms: usize) -> (MeasureSpace, Kernel) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
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

    #[test]
    fn full_contraction_is_squared_norm() {
        let (space, f) = random_sym_kernel(7, 3);
        let full = contract(&space, &f, &f, 2, 2).unwrap();
        assert_eq!(full.order(), 0);
        let n2 = norm2(&space, &f).unwrap();
        assert!((full.scalar_value() - n2).abs() <= 1e-12 * (1.0 + n2));
    }

    #[test]
    fn two_atom_idempotent_contraction() {
        // e = indicator of atom 1 on the two-atom space: f = e⊗e has
        // f ⋆_1^1 f = f and f ⋆_2^1 f = e (enumerated by hand).
        let space = two_atom_space();
        let e = e_indicator_atom0();
        let f = Kernel::rank_one(2, 1.0, e.clone());
        let c11 = contract(&space, &f, &f, 1, 1).unwrap();
        let diff = c11.add(&f.scale(-1.0), &space).unwrap();
        assert!(norm2(&space, &diff).unwrap() <= 1e-24);

        let c21 = contract(&space, &f, &f, 2, 1).unwrap();
        assert_eq!(c21.order(), 1);
        let e_kernel = Kernel::rank_one(1, 1.0, e);
        let diff = c21.add(&e_kernel.scale(-1.0), &space).unwrap();
        assert!(norm2(&space, &diff).unwrap() <= 1e-24);
    }

    #[test]
    fn zero_identification_is_tensor_product() {
        let (space, f) = random_sym_kernel(11, 2);
        let t = contract(&space, &f, &f, 0, 0).unwrap();
        assert_eq!(t.order(), 4);
        // ‖f⊗f‖² = ‖f‖⁴
        let n2 = norm2(&space, &f).unwrap();
        let t2 = norm2(&space, &t).unwrap();
        assert!((t2 - n2 * n2).abs() <= 1e-10 * (1.0 + n2 * n2));
    }

    #[test]
    fn symmetrize_two_factors() {
        let space = MeasureSpace::uniform_1d(-1.0, 1.0, 1.0, 1.0).unwrap();
        let a = Factor::indicator(0.0, 1.0);
        let b = Factor::poly(PiecewisePoly::poly(-1.0, 1.0, vec![0.0, 1.0]));
        let k = Kernel::separable(2, vec![Term { coeff: 1.0, factors: vec![a, b] }]);
        let s = symmetrize(&space, &k).unwrap();
        let x = [0.25_f64];
        let y = [-0.5_f64];
        let v = s.eval_plain(&space, &[&x, &y]).unwrap();
        assert!((v - (-0.25)).abs() < 1e-15); // (a(x)b(y)+a(y)b(x))/2 = (-0.5 + 0)/2? a(0.25)=1,b(-0.5)=-0.5; a(-0.5)=0 -> -0.25
        // idempotence
        let s2 = symmetrize(&space, &s).unwrap();
        let d = s2.add(&s.scale(-1.0), &space).unwrap();
        assert!(norm2(&space, &d).unwrap() <= 1e-24);
    }

    #[test]
    fn symmetrize_order3_averages_six_permutations() {
        let space = MeasureSpace::uniform_1d(0.0, 3.0, 1.0, 1.0).unwrap();
        let a = Factor::indicator(0.0, 1.0);
        let b = Factor::indicator(1.0, 2.0);
        let c = Factor::indicator(2.0, 3.0);
        let k = Kernel::separable(3, vec![Term { coeff: 6.0, factors: vec![a, b, c] }]);
        let s = symmetrize(&space, &k).unwrap();
        let (x, y, z) = ([2.5_f64], [0.5_f64], [1.5_f64]);
        // Exactly one permutation hits (a,b,c) -> coeff 6/3! = 1 at any distinct triple.
        let v = s.eval_plain(&space, &[&x, &y, &z]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norms_match_isometry_examples() {
        // f = e⊗e with ‖e‖² = 1 -> ‖f‖² = 1
        let space = two_atom_space();
        let f = Kernel::rank_one(2, 1.0, e_indicator_atom0());
        assert!((norm2(&space, &f).unwrap() - 1.0).abs() < 1e-14);

        // h₂ = Σ eᵢ⊗eᵢ with orthonormal eᵢ -> ‖h₂‖² = ν
        let nu = 3usize;
        let pts: Vec<f64> = (0..nu).map(|i| i as f64).collect();
        let space = MeasureSpace::grid_1d(pts, vec![1.0; nu], 1.0).unwrap();
        let h2 = Kernel::rank_sum(
            2,
            (0..nu)
                .map(|i| (1.0, Factor::indicator(i as f64 - 0.25, i as f64 + 0.25)))
                .collect(),
        );
        assert!((norm2(&space, &h2).unwrap() - nu as f64).abs() < 1e-12);

        // inner(f, 0) = 0
        assert_eq!(inner(&space, &h2, &Kernel::zero(2)).unwrap(), 0.0);
    }

    #[test]
    fn product_kernel_small_cases() {
        let (space, f) = random_sym_kernel(23, 2);
        let n2 = norm2(&space, &f).unwrap();
        // p = 0: G_0² f = 2‖f‖²
        let g0 = product_kernel(&space, &f, 0).unwrap();
        assert!((g0.scalar_value() - 2.0 * n2).abs() <= 1e-12 * (1.0 + n2));
        // p = 4: G_4² f = f ⋆̃₀⁰ f
        let g4 = product_kernel(&space, &f, 4).unwrap();
        let t = sym_contract(&space, &f, &f, 0, 0).unwrap();
        let d = g4.add(&t.scale(-1.0), &space).unwrap();
        assert!(norm2(&space, &d).unwrap() <= 1e-20);
        // p = 2: G_2² f = 4·f⋆̃₁¹f + 2·f² (f² symmetric already)
        let g2 = product_kernel(&space, &f, 2).unwrap();
        let c11 = sym_contract(&space, &f, &f, 1, 1).unwrap();
        let fsq = contract(&space, &f, &f, 2, 0).unwrap();
        let expect = c11.scale(4.0).add(&fsq.scale(2.0), &space).unwrap();
        let d = g2.add(&expect.scale(-1.0), &space).unwrap();
        assert!(norm2(&space, &d).unwrap() <= 1e-18);
        // p out of range
        assert!(matches!(
            product_kernel(&space, &f, 5),
            Err(Error::ProductOrderRange { q: 2, p: 5 })
        ));
    }

    #[test]
    fn c_q_values() {
        assert_eq!(c_q_constant(2).unwrap(), 1.0);
        assert!((c_q_constant(4).unwrap() - 1.0 / 18.0).abs() < 1e-18);
        assert!((c_q_constant(6).unwrap() - 1.0 / 600.0).abs() < 1e-18);
        assert!(matches!(c_q_constant(3), Err(Error::OddOrder { q: 3 })));
    }

    #[test]
    fn middle_defect_examples() {
        // Mean-zero unit e on the two-atom space with weights (1/2, 1/2)
        // scaled so that ∫e dμ = 0 and ‖e‖ = 1: e = ±1.
        let space = MeasureSpace::grid_1d(vec![-0.5, 0.5], vec![0.5, 0.5], 1.0).unwrap();
        let e = Factor::poly(
            PiecewisePoly::step(0.0, 1.0, 1.0).add(&PiecewisePoly::step(-1.0, 0.0, -1.0)),
        );
        let f = Kernel::rank_one(2, 1.0, e);
        assert!((norm2(&space, &f).unwrap() - 1.0).abs() < 1e-14);
        // f⋆₁¹f = f and c₂ = 1 -> defect 0
        assert!(middle_contraction_defect(&space, &f).unwrap() <= 1e-12);
        // 2f: (2f)⋆̃₁¹(2f) = 4f, defect ‖4f − 2f‖ = 2‖f‖ = 2
        let f2 = f.scale(2.0);
        let d = middle_contraction_defect(&space, &f2).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        // zero kernel
        assert_eq!(middle_contraction_defect(&space, &Kernel::zero(2)).unwrap(), 0.0);
    }

    #[test]
    fn us_identity_for_random_kernels() {
        // 4!·‖f⋆̃₀⁰f‖² = 2(2‖f‖²)² + 16‖f⋆₁¹f‖²
        for seed in 0..10u64 {
            let (space, f) = random_sym_kernel(100 + seed, 3);
            let t00 = sym_contract(&space, &f, &f, 0, 0).unwrap();
            let lhs = 24.0 * norm2(&space, &t00).unwrap();
            let n2 = norm2(&space, &f).unwrap();
            let c11 = contraction_norm(&space, &f, 1, 1).unwrap();
            let rhs = 2.0 * (2.0 * n2) * (2.0 * n2) + 16.0 * c11 * c11;
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs), "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn reflection_identity_for_pure_power_norms() {
        // ‖f⋆ₐ⁰f‖ = ‖f⋆_q^{q−a}f‖ for 2 ≤ a ≤ q (and the general
        // reflection ‖f⋆ᵣˡf‖ = ‖f⋆_{q−l}^{q−r}f‖).
        let (space, f) = random_sym_kernel(55, 2);
        for a in 2..=2usize {
            let lhs = contraction_norm(&space, &f, a, 0).unwrap();
            let rhs = contraction_norm(&space, &f, 2, 2 - a).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
        }
        let lhs = contraction_norm(&space, &f, 1, 0).unwrap();
        let rhs = contraction_norm(&space, &f, 2, 1).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn symmetrisation_contracts_norms() {
        // ‖f ⋆̃ᵣˡ f‖ ≤ ‖f ⋆ᵣˡ f‖
        for seed in 0..5u64 {
            let (space, f) = random_sym_kernel(200 + seed, 3);
            for (r, l) in [(1, 0), (2, 0), (2, 1), (1, 1)] {
                let plain = contraction_norm(&space, &f, r, l).unwrap();
                let symk = sym_contract(&space, &f, &f, r, l).unwrap();
                let tilde = norm(&space, &symk).unwrap();
                assert!(tilde <= plain + 1e-12 * (1.0 + plain));
            }
        }
    }

    #[test]
    fn separable_and_dense_agree() {
        // Norm-coherence: the same kernel discretised on a grid gives the
        // same contraction norms to 1e-8 relative.
        let pts: Vec<f64> = (0..40).map(|i| -1.0 + (i as f64 + 0.5) * 0.05).collect();
        let space = MeasureSpace::grid_1d(pts, vec![0.05 * 0.5; 40], 2.0).unwrap();
        let e1 = Factor::step(-1.0, 0.2, 0.7);
        let e2 = Factor::step(-0.4, 1.0, -1.3);
        let f = Kernel::rank_sum(2, vec![(1.0, e1), (0.6, e2)]);
        let fd = f.to_dense(&space).unwrap();
        for (r, l) in [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)] {
            let a = contraction_norm(&space, &f, r, l).unwrap();
            let cd = contract(&space, &fd, &fd, r, l).unwrap();
            let b = norm(&space, &cd).unwrap();
            assert!((a - b).abs() <= 1e-8 * (1.0 + b), "(r,l)=({r},{l}): {a} vs {b}");
        }
    }

    #[test]
    fn intensity_scaling_contract() {
        // Multiplying the intensity by λ multiplies ‖f‖² by λ^q.
        let (space, f) = random_sym_kernel(77, 3);
        let n2 = norm2(&space, &f).unwrap();
        let lam = 3.5;
        let scaled = space.with_intensity(space.intensity() * lam).unwrap();
        let n2s = norm2(&scaled, &f).unwrap();
        assert!((n2s - lam * lam * n2).abs() <= 1e-10 * (1.0 + n2s));
    }

    #[test]
    fn factor_arc_sharing_is_cheap() {
        let e = e_indicator_atom0();
        let f = Kernel::rank_one(4, 1.0, e.clone());
        if let (Factor::Poly(a), Some(terms)) = (&e, f.terms()) {
            if let Factor::Poly(b) = &terms[0].factors[3] {
                assert!(Arc::ptr_eq(a, b));
            }
        }
    }
}
