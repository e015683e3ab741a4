//! Pathwise evaluation on Poisson configurations.
//!
//! U-statistics are sums over ordered distinct tuples; they are computed
//! through the partition-lattice (Möbius) identity
//!
//!   U^{≠}_i(g₁⊗…⊗g_i) = Σ_π Π_{B∈π} (−1)^{|B|−1}(|B|−1)! · Σ_k Π_{b∈B} g_b(Y_k),
//!
//! which costs O(Bell(i)·i·N) instead of O(N^i); the direct tuple sum is
//! kept as the test oracle. Multiple Wiener-Itô integrals are evaluated
//! exactly at every configuration by inverting the chaos decomposition of
//! Poissonized U-statistics:
//!
//!   I_q(f) = Σ_{i=0}^q (−1)^{q−i} C(q,i) U^{≠}_i( ∫ f dμ_n^{q−i} ),
//!
//! all partial integrals under the in-force measure μ_n. Kernels whose terms
//! are rank-one powers e^{⊗q} use plain power sums; kernels carrying a
//! `BinIndex` (disjoint regular supports) are evaluated with one factor
//! evaluation per sample point.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::PoissonSample;
use crate::contract::{binomial, factorial, norm2};
use crate::error::Error;
use crate::space::{ChaosExpansion, Factor, Kernel, KernelRepr, MeasureSpace, Term};
use crate::Result;

// ---------------------------------------------------------------------------
// Set partitions
// ---------------------------------------------------------------------------

type Partition = Vec<Vec<usize>>;

/// All set partitions of {0..n-1}; `partitions(0)` is the single empty one.
fn set_partitions(n: usize) -> Vec<Partition> {
    let mut acc: Vec<Partition> = vec![Vec::new()];
    for e in 0..n {
        let mut next = Vec::new();
        for p in &acc {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(e);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![e]);
            next.push(q);
        }
        acc = next;
    }
    acc
}

fn mobius_weight(p: &Partition) -> f64 {
    let mut w = 1.0;
    for b in p {
        let c = b.len();
        if c % 2 == 0 {
            w = -w;
        }
        w *= factorial(c - 1);
    }
    w
}

// ---------------------------------------------------------------------------
// Evaluation plans
// ---------------------------------------------------------------------------

/// Precomputed evaluation plan for one kernel on one space. Sample-independent
/// work (factor integrals, partition tables, rank-one detection) happens once
/// so that replication loops stay O(points) per draw.
pub struct PathwisePlan<'a> {
    space: &'a MeasureSpace,
    kernel: &'a Kernel,
    q: usize,
    partitions: Vec<Vec<Partition>>,
    plan: PlanRepr,
}

enum PlanRepr {
    Separable {
        /// Per term: suffix products of factor integrals under μ_n
        /// (suffix[i] = Π_{j≥i} ∫g_j dμ_n; suffix[q] = 1).
        suffix: Vec<Vec<f64>>,
        /// Per term: all factors are the same elementary function.
        rank1: Vec<bool>,
        /// Every term rank-one and the kernel carries a bin index.
        binned: bool,
        /// Σ_t c_t·(−1)^q·suffix_t[0]: the integral-mode value of a term
        /// none of whose cells received a point (U_i = 0 for i ≥ 1).
        empty_total: f64,
    },
    Dense {
        /// Partial-integral tensors: level i holds ∫ f dμ_n^{q−i} of order i.
        levels: Vec<Vec<f64>>,
        atoms: usize,
    },
}

impl<'a> PathwisePlan<'a> {
    pub fn new(space: &'a MeasureSpace, kernel: &'a Kernel) -> Result<Self> {
        let q = kernel.order();
        if q > crate::ORDER_CAP {
            return Err(Error::OrderCapExceeded { q, cap: crate::ORDER_CAP });
        }
        let partitions: Vec<Vec<Partition>> = (0..=q).map(set_partitions).collect();
        let plan = match kernel.repr() {
            KernelRepr::Separable(terms) => {
                let mut suffix = Vec::with_capacity(terms.len());
                let mut rank1 = Vec::with_capacity(terms.len());
                for t in terms {
                    let mut suf = vec![1.0; q + 1];
                    for j in (0..q).rev() {
                        suf[j] = suf[j + 1] * space.integral(&t.factors[j])?;
                    }
                    suffix.push(suf);
                    rank1.push(is_rank_one(t));
                }
                let binned = kernel.bins().is_some() && rank1.iter().all(|&b| b);
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                let empty_total = terms
                    .iter()
                    .zip(&suffix)
                    .map(|(t, suf)| t.coeff * sign * suf[0])
                    .sum();
                PlanRepr::Separable { suffix, rank1, binned, empty_total }
            }
            KernelRepr::DenseGrid(data) => {
                let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
                let n = space.intensity();
                let w: Vec<f64> =
                    space.grid_weights().unwrap().iter().map(|&x| n * x).collect();
                let mut levels: Vec<Vec<f64>> = vec![Vec::new(); q + 1];
                levels[q] = data.clone();
                for i in (0..q).rev() {
                    // integrate the last axis of level i+1
                    let upper = &levels[i + 1];
                    let len = atoms.pow(i as u32);
                    let mut lower = vec![0.0; len];
                    for (j, slot) in lower.iter_mut().enumerate() {
                        let base = j * atoms;
                        let mut acc = 0.0;
                        for (a, &wa) in w.iter().enumerate() {
                            acc += wa * upper[base + a];
                        }
                        *slot = acc;
                    }
                    levels[i] = lower;
                }
                PlanRepr::Dense { levels, atoms }
            }
        };
        Ok(PathwisePlan { space, kernel, q, partitions, plan })
    }

    /// Pathwise I_q(f) at the configuration.
    pub fn integral(&self, s: &PoissonSample) -> Result<f64> {
        self.eval(s, true, &mut PathwiseScratch::default())
    }

    /// Pathwise U-statistic Σ over ordered distinct tuples of f's values.
    pub fn ustat(&self, s: &PoissonSample) -> Result<f64> {
        self.eval(s, false, &mut PathwiseScratch::default())
    }

    /// [`Self::integral`] with caller-owned scratch (hot replication loops).
    pub fn integral_with(&self, scratch: &mut PathwiseScratch, s: &PoissonSample) -> Result<f64> {
        self.eval(s, true, scratch)
    }

    /// [`Self::ustat`] with caller-owned scratch.
    pub fn ustat_with(&self, scratch: &mut PathwiseScratch, s: &PoissonSample) -> Result<f64> {
        self.eval(s, false, scratch)
    }

    fn eval(&self, s: &PoissonSample, invert: bool, scratch: &mut PathwiseScratch) -> Result<f64> {
        let q = self.q;
        if q == 0 {
            return Ok(self.kernel.scalar_value());
        }
        match &self.plan {
            PlanRepr::Separable { suffix, rank1, binned, empty_total } => {
                let terms = self.kernel.terms().unwrap();
                if *binned {
                    return self.eval_binned(terms, suffix, *empty_total, s, invert, scratch);
                }
                let mut total = 0.0;
                for (t, term) in terms.iter().enumerate() {
                    if rank1[t] {
                        let ps = power_sums(self.space, &term.factors[0], s, q)?;
                        total += term.coeff
                            * self.combine_levels(&ps, &suffix[t], invert, None)?;
                    } else {
                        let vals = value_matrix(self.space, &term.factors, s)?;
                        total += term.coeff
                            * self.combine_levels(&[], &suffix[t], invert, Some((&vals, s)))?;
                    }
                }
                Ok(total)
            }
            PlanRepr::Dense { levels, atoms } => {
                let mut u = vec![0.0; *atoms];
                for i in 0..s.sites() {
                    let a = s.atom(i).ok_or(Error::NonAtomPoint)?;
                    u[a] += s.mult(i);
                }
                let mut total = 0.0;
                for i in (0..=q).rev() {
                    let ui = dense_ustat(&levels[i], i, *atoms, &u, &self.partitions[i]);
                    if invert {
                        let sign = if (q - i) % 2 == 0 { 1.0 } else { -1.0 };
                        total += sign * binomial(q, i) * ui;
                    } else {
                        total += ui;
                        break;
                    }
                }
                Ok(total)
            }
        }
    }

    /// Assemble Σᵢ (−1)^{q−i} C(q,i)·suffix[i]·U_i (or U_q alone) for one
    /// term, from power sums or a value matrix.
    fn combine_levels(
        &self,
        ps: &[f64],
        suffix: &[f64],
        invert: bool,
        general: Option<(&Vec<Vec<f64>>, &PoissonSample)>,
    ) -> Result<f64> {
        let q = self.q;
        let level = |i: usize| -> f64 {
            match general {
                None => rank1_ustat(ps, &self.partitions[i]),
                Some((vals, s)) => general_ustat(vals, s, &self.partitions[i]),
            }
        };
        if !invert {
            return Ok(level(q));
        }
        let mut acc = 0.0;
        for i in 0..=q {
            let sign = if (q - i) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial(q, i) * suffix[i] * level(i);
        }
        Ok(acc)
    }

    /// Binned rank-one kernels: one pass over the points (each touches one
    /// term), then only the touched cells are combined — the rest contribute
    /// the precomputed empty-cell baseline. O(points + touched) per call,
    /// allocation-free given scratch.
    fn eval_binned(
        &self,
        terms: &[Term],
        suffix: &[Vec<f64>],
        empty_total: f64,
        s: &PoissonSample,
        invert: bool,
        scratch: &mut PathwiseScratch,
    ) -> Result<f64> {
        let q = self.q;
        let bins = self.kernel.bins().unwrap();
        let width = q + 2; // slot 0 is the touched flag, 1..=q the power sums
        let need = terms.len() * width;
        if scratch.ps.len() < need {
            scratch.ps.resize(need, 0.0);
        }
        debug_assert!(scratch.touched.is_empty());
        for i in 0..s.sites() {
            let x = s.site(i);
            let Some(cell) = bins.cell(x[0]) else { continue };
            if cell >= terms.len() {
                continue;
            }
            let v = terms[cell].factors[0].eval(self.space, x)?;
            if v == 0.0 {
                continue;
            }
            let base = cell * width;
            if scratch.ps[base] == 0.0 {
                scratch.ps[base] = 1.0;
                scratch.touched.push(cell as u32);
            }
            let m = s.mult(i);
            let mut pw = 1.0;
            for c in 1..=q {
                pw *= v;
                scratch.ps[base + c] += m * pw;
            }
        }
        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
        let mut total = if invert { empty_total } else { 0.0 };
        for ti in 0..scratch.touched.len() {
            let cell = scratch.touched[ti] as usize;
            let base = cell * width;
            let combo = {
                let ps = &scratch.ps[base..base + width];
                self.combine_levels(&ps[..=q.min(width - 1)], &suffix[cell], invert, None)?
            };
            let empty = if invert { sign * suffix[cell][0] } else { 0.0 };
            total += terms[cell].coeff * (combo - empty);
            for slot in &mut scratch.ps[base..base + width] {
                *slot = 0.0;
            }
        }
        scratch.touched.clear();
        Ok(total)
    }
}

/// Reusable buffers for [`PathwisePlan`] hot loops.
#[derive(Debug, Default)]
pub struct PathwiseScratch {
    ps: Vec<f64>,
    touched: Vec<u32>,
}

fn is_rank_one(t: &Term) -> bool {
    let Some((first, rest)) = t.factors.split_first() else { return false };
    rest.iter().all(|f| factors_identical(first, f))
}

fn factors_identical(a: &Factor, b: &Factor) -> bool {
    match (a, b) {
        (Factor::Poly(x), Factor::Poly(y)) => alloc::sync::Arc::ptr_eq(x, y) || x == y,
        (Factor::GridVec(x), Factor::GridVec(y)) => {
            alloc::sync::Arc::ptr_eq(x, y) || x == y
        }
        _ => false,
    }
}

/// Power sums p_c = Σ_sites mult·g(x)^c, c = 1..=q.
fn power_sums(
    space: &MeasureSpace,
    g: &Factor,
    s: &PoissonSample,
    q: usize,
) -> Result<Vec<f64>> {
    let mut ps = vec![0.0; q + 1];
    for i in 0..s.sites() {
        let v = match s.atom(i) {
            Some(a) => g.eval_atom(space, a),
            None => g.eval(space, s.site(i))?,
        };
        if v == 0.0 {
            continue;
        }
        let m = s.mult(i);
        let mut pw = 1.0;
        for c in 1..=q {
            pw *= v;
            ps[c] += m * pw;
        }
    }
    Ok(ps)
}

/// U^{≠}_i from power sums of a single elementary function.
fn rank1_ustat(ps: &[f64], partitions: &[Partition]) -> f64 {
    let mut acc = 0.0;
    for p in partitions {
        let mut prod = mobius_weight(p);
        for b in p {
            prod *= ps[b.len()];
        }
        acc += prod;
    }
    acc
}

/// Per-slot factor values at every site.
fn value_matrix(
    space: &MeasureSpace,
    factors: &[Factor],
    s: &PoissonSample,
) -> Result<Vec<Vec<f64>>> {
    let mut vals = Vec::with_capacity(factors.len());
    for g in factors {
        let mut row = Vec::with_capacity(s.sites());
        for i in 0..s.sites() {
            let v = match s.atom(i) {
                Some(a) => g.eval_atom(space, a),
                None => g.eval(space, s.site(i))?,
            };
            row.push(v);
        }
        vals.push(row);
    }
    Ok(vals)
}

/// U^{≠}_i for a general product term from its value matrix; uses the first
/// i rows.
fn general_ustat(vals: &Vec<Vec<f64>>, s: &PoissonSample, partitions: &[Partition]) -> f64 {
    let mut acc = 0.0;
    for p in partitions {
        let mut prod = mobius_weight(p);
        for b in p {
            let mut m_b = 0.0;
            for k in 0..s.sites() {
                let mut v = s.mult(k);
                for &slot in b {
                    v *= vals[slot][k];
                }
                m_b += v;
            }
            prod *= m_b;
        }
        acc += prod;
    }
    acc
}

/// U^{≠}_i for a dense tensor: axes in the same partition block share one
/// atom index, weighted by the per-atom multiplicity vector.
fn dense_ustat(
    data: &[f64],
    order: usize,
    atoms: usize,
    u: &[f64],
    partitions: &[Partition],
) -> f64 {
    if order == 0 {
        return data.first().copied().unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for p in partitions {
        let w = mobius_weight(p);
        let nb = p.len();
        let mut idx = vec![0usize; nb];
        let mut sum = 0.0;
        loop {
            let mut weight = 1.0;
            for (b, &a) in idx.iter().enumerate() {
                let _ = b;
                weight *= u[a];
            }
            if weight != 0.0 {
                // map axis -> atom via its block
                let mut flat = 0usize;
                for axis in 0..order {
                    let block = p.iter().position(|b| b.contains(&axis)).unwrap();
                    flat = flat * atoms + idx[block];
                }
                sum += weight * data[flat];
            }
            if !advance_idx(&mut idx, atoms) {
                break;
            }
        }
        acc += w * sum;
    }
    acc
}

fn advance_idx(idx: &mut [usize], base: usize) -> bool {
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
// Public operations
// ---------------------------------------------------------------------------

/// Pathwise multiple Wiener-Itô integral I_q(f) at the configuration.
pub fn multiple_integral_eval(
    space: &MeasureSpace,
    f: &Kernel,
    s: &PoissonSample,
) -> Result<f64> {
    PathwisePlan::new(space, f)?.integral(s)
}

/// Pathwise U-statistic of a symmetric kernel: the sum over ordered distinct
/// tuples of sample points (empty when the configuration is too small).
pub fn ustat_eval(space: &MeasureSpace, h: &Kernel, s: &PoissonSample) -> Result<f64> {
    PathwisePlan::new(space, h)?.ustat(s)
}

/// Quadratic/cubic-cost direct tuple sum; the oracle for [`ustat_eval`].
pub fn ustat_direct(space: &MeasureSpace, h: &Kernel, s: &PoissonSample) -> Result<f64> {
    let k = h.order();
    // expand individuals
    let mut individuals: Vec<usize> = Vec::new();
    for i in 0..s.sites() {
        for _ in 0..(s.mult(i) as usize) {
            individuals.push(i);
        }
    }
    let n = individuals.len();
    let mut idx = vec![0usize; k];
    let mut total = 0.0;
    'outer: loop {
        let mut distinct = true;
        for a in 0..k {
            for b in (a + 1)..k {
                if idx[a] == idx[b] {
                    distinct = false;
                }
            }
        }
        if distinct && n > 0 {
            let args: Vec<&[f64]> = idx.iter().map(|&i| s.site(individuals[i])).collect();
            total += h.eval_plain(space, &args)?;
        }
        if n == 0 {
            break;
        }
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                continue 'outer;
            }
            *slot = 0;
        }
        break;
    }
    Ok(total)
}

/// Pathwise Malliavin derivative D_z I_q(f) = q·I_{q−1}(f(z,·)).
pub fn derivative_eval(
    space: &MeasureSpace,
    f: &Kernel,
    s: &PoissonSample,
    z: &[f64],
) -> Result<f64> {
    let q = f.order();
    if q == 0 {
        return Ok(0.0);
    }
    let section = section_kernel(space, f, z)?;
    Ok(q as f64 * multiple_integral_eval(space, &section, s)?)
}

/// f(z,·): the kernel with the first argument fixed at z.
pub fn section_kernel(space: &MeasureSpace, f: &Kernel, z: &[f64]) -> Result<Kernel> {
    let q = f.order();
    debug_assert!(q >= 1);
    match f.repr() {
        KernelRepr::Separable(terms) => {
            let mut out = Vec::with_capacity(terms.len());
            for t in terms {
                let v = t.factors[0].eval(space, z)?;
                if v == 0.0 {
                    continue;
                }
                out.push(Term { coeff: t.coeff * v, factors: t.factors[1..].to_vec() });
            }
            let mut k = Kernel::separable(q - 1, out);
            k.prune();
            Ok(k)
        }
        KernelRepr::DenseGrid(data) => {
            let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
            let a = space.atom_index(z).ok_or(Error::NonAtomPoint)?;
            let len = atoms.pow((q - 1) as u32);
            let slice = data[a * len..(a + 1) * len].to_vec();
            Kernel::dense_grid(q - 1, slice, space)
        }
    }
}

/// Pathwise value of a finite chaos expansion c₀ + Σ I_q(f_q).
pub fn chaos_eval(space: &MeasureSpace, e: &ChaosExpansion, s: &PoissonSample) -> Result<f64> {
    let mut v = e.constant;
    for k in e.components.values() {
        v += multiple_integral_eval(space, k, s)?;
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Hoeffding projections
// ---------------------------------------------------------------------------

/// The Hoeffding projection h_i = C(k,i)·∫ h(z₁..z_i, •) μ̄^{k−i}(d•) where
/// μ̄ = μ/μ(Z) is the normalized base measure (the sampling law of one point).
pub fn hoeffding_projection(space: &MeasureSpace, h: &Kernel, i: usize) -> Result<Kernel> {
    let k = h.order();
    if i < 1 || i > k {
        return Err(Error::ProjectionRange { k, i });
    }
    let proj = conditional_projection(space, h, i)?;
    Ok(proj.scale(binomial(k, i)))
}

/// E[h | first i arguments]: ∫ h(z₁..z_i, •) μ̄^{k−i}(d•) without the
/// binomial factor.
fn conditional_projection(space: &MeasureSpace, h: &Kernel, i: usize) -> Result<Kernel> {
    let k = h.order();
    let mass_n = space.mass_n();
    match h.repr() {
        KernelRepr::Separable(terms) => {
            let mut out = Vec::with_capacity(terms.len());
            for t in terms {
                let mut coeff = t.coeff;
                for j in i..k {
                    coeff *= space.integral(&t.factors[j])? / mass_n;
                    if coeff == 0.0 {
                        break;
                    }
                }
                if coeff == 0.0 {
                    continue;
                }
                out.push(Term { coeff, factors: t.factors[..i].to_vec() });
            }
            let mut k = Kernel::separable(i, out);
            k.prune();
            Ok(k)
        }
        KernelRepr::DenseGrid(data) => {
            let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
            let wbar: Vec<f64> = space
                .grid_weights()
                .unwrap()
                .iter()
                .map(|&w| w / space.base_mass())
                .collect();
            let mut cur = data.clone();
            for _ in i..k {
                let len = cur.len() / atoms;
                let mut next = vec![0.0; len];
                for (j, slot) in next.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (a, &w) in wbar.iter().enumerate() {
                        acc += w * cur[j * atoms + a];
                    }
                    *slot = acc;
                }
                cur = next;
            }
            Kernel::dense_grid(i, cur, space)
        }
    }
}

/// ‖h₁‖ under the normalized base measure: zero iff the order-2 kernel is
/// completely degenerate.
pub fn degeneracy_defect(space: &MeasureSpace, h: &Kernel) -> Result<f64> {
    let h1 = hoeffding_projection(space, h, 1)?;
    let base = space.with_intensity(1.0 / space.base_mass())?;
    Ok(norm2(&base, &h1)?.sqrt())
}

/// Smallest i in 1..=k with a nonzero conditional projection (tolerance
/// 1e-10); completely degenerate kernels have rank k.
pub fn hoeffding_rank(space: &MeasureSpace, h: &Kernel) -> Result<usize> {
    let k = h.order();
    let base = space.with_intensity(1.0 / space.base_mass())?;
    for i in 1..=k {
        let p = conditional_projection(space, h, i)?;
        if norm2(&base, &p)?.sqrt() > 1e-10 {
            return Ok(i);
        }
    }
    Ok(k)
}
