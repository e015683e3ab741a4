//! Finite-mass control measures and kernel representations.
//!
//! A [`MeasureSpace`] is the pair (μ, n): a finite base measure μ on a subset
//! of R^d together with an intensity multiplier n, so that the control measure
//! in force is always μ_n = n·μ. Grid mode stores μ as weighted atoms
//! (quadrature of a non-atomic measure); continuum mode stores a
//! piecewise-constant density with an inverse-CDF sampler.
//!
//! A [`Kernel`] of order q is a square-integrable function on the q-fold
//! product space, stored either as a separable sum Σ cᵢ·gᵢ₁⊗…⊗gᵢ_q of
//! one-variable factors (exact Gram algebra) or as a dense q-dimensional
//! array over the grid atoms (weighted tensor algebra).

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Relative tolerance used when pruning separable terms after algebra steps.
pub const PRUNE_EPS: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Piecewise polynomials
// ---------------------------------------------------------------------------

/// One polynomial piece: value Σ coeffs[k]·x^k on [lo, hi).
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

/// A compactly supported piecewise polynomial on the real line.
///
/// Pieces are kept sorted and non-overlapping; outside every piece the value
/// is zero. Products and sums of piecewise polynomials stay in the class, so
/// all inner products against a piecewise-constant density have closed forms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewisePoly {
    pieces: Vec<Piece>,
}

impl PiecewisePoly {
    pub fn new(mut pieces: Vec<Piece>) -> Self {
        pieces.retain(|p| p.hi > p.lo && p.coeffs.iter().any(|&c| c != 0.0));
        pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite breakpoints"));
        for w in pieces.windows(2) {
            assert!(w[0].hi <= w[1].lo + 1e-15, "pieces must not overlap");
        }
        PiecewisePoly { pieces }
    }

    /// Indicator of (a, b).
    pub fn indicator(a: f64, b: f64) -> Self {
        Self::new(vec![Piece { lo: a, hi: b, coeffs: vec![1.0] }])
    }

    /// Constant c on (a, b).
    pub fn step(a: f64, b: f64, c: f64) -> Self {
        Self::new(vec![Piece { lo: a, hi: b, coeffs: vec![c] }])
    }

    /// Polynomial Σ coeffs[k]·x^k restricted to (a, b).
    pub fn poly(a: f64, b: f64, coeffs: Vec<f64>) -> Self {
        Self::new(vec![Piece { lo: a, hi: b, coeffs }])
    }

    pub fn zero() -> Self {
        PiecewisePoly { pieces: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Support hull (lo, hi), or None for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.pieces.first()?;
        let last = self.pieces.last()?;
        Some((first.lo, last.hi))
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Binary search for the piece containing x; half-open [lo, hi).
        let idx = self.pieces.partition_point(|p| p.hi <= x);
        match self.pieces.get(idx) {
            Some(p) if x >= p.lo && x < p.hi => horner(&p.coeffs, x),
            _ => 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                coeffs: p.coeffs.iter().map(|&a| a * c).collect(),
            })
            .collect();
        PiecewisePoly { pieces }
    }

    /// Pointwise sum, merging overlapping pieces on a common refinement.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let mut cuts: Vec<f64> = Vec::new();
        for p in self.pieces.iter().chain(other.pieces.iter()) {
            cuts.push(p.lo);
            cuts.push(p.hi);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + a.abs()));
        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let mut coeffs: Vec<f64> = Vec::new();
            for src in [self, other] {
                let idx = src.pieces.partition_point(|p| p.hi <= mid);
                if let Some(p) = src.pieces.get(idx) {
                    if mid >= p.lo && mid < p.hi {
                        if coeffs.len() < p.coeffs.len() {
                            coeffs.resize(p.coeffs.len(), 0.0);
                        }
                        for (k, &c) in p.coeffs.iter().enumerate() {
                            coeffs[k] += c;
                        }
                    }
                }
            }
            if coeffs.iter().any(|&c| c != 0.0) {
                pieces.push(Piece { lo, hi, coeffs });
            }
        }
        PiecewisePoly { pieces }
    }

    /// Pointwise product (degrees add; supports intersect).
    pub fn mul(&self, other: &Self) -> Self {
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                let lo = a.lo.max(b.lo);
                let hi = a.hi.min(b.hi);
                if hi <= lo {
                    continue;
                }
                let mut coeffs = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
                for (i, &ca) in a.coeffs.iter().enumerate() {
                    for (j, &cb) in b.coeffs.iter().enumerate() {
                        coeffs[i + j] += ca * cb;
                    }
                }
                pieces.push(Piece { lo, hi, coeffs });
            }
        }
        Self::new(pieces)
    }

    /// ∫ self(x)·p(x) dx against a piecewise-constant density.
    fn integral_against(&self, density: &[Piece]) -> f64 {
        let mut total = 0.0;
        for a in &self.pieces {
            for d in density {
                let lo = a.lo.max(d.lo);
                let hi = a.hi.min(d.hi);
                if hi <= lo {
                    continue;
                }
                let p = d.coeffs[0];
                let mut seg = 0.0;
                for (k, &c) in a.coeffs.iter().enumerate() {
                    let kk = (k + 1) as f64;
                    seg += c * (powi(hi, k + 1) - powi(lo, k + 1)) / kk;
                }
                total += p * seg;
            }
        }
        total
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    let mut v = 0.0;
    for &c in coeffs.iter().rev() {
        v = v * x + c;
    }
    v
}

fn powi(x: f64, k: usize) -> f64 {
    let mut v = 1.0;
    for _ in 0..k {
        v *= x;
    }
    v
}

// ---------------------------------------------------------------------------
// Factors
// ---------------------------------------------------------------------------

/// A one-variable factor of a separable kernel.
///
/// `Poly` factors act on the first coordinate of a point and have exact
/// integrals in both space modes; `GridVec` factors list values per grid atom
/// and are tied to grid mode.
#[derive(Debug, Clone)]
pub enum Factor {
    Poly(Arc<PiecewisePoly>),
    GridVec(Arc<Vec<f64>>),
}

impl Factor {
    pub fn poly(p: PiecewisePoly) -> Self {
        Factor::Poly(Arc::new(p))
    }

    pub fn indicator(a: f64, b: f64) -> Self {
        Factor::poly(PiecewisePoly::indicator(a, b))
    }

    pub fn step(a: f64, b: f64, c: f64) -> Self {
        Factor::poly(PiecewisePoly::step(a, b, c))
    }

    pub fn grid_vec(values: Vec<f64>) -> Self {
        Factor::GridVec(Arc::new(values))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Factor::Poly(p) => p.is_zero(),
            Factor::GridVec(v) => v.iter().all(|&x| x == 0.0),
        }
    }

    /// Support hull for cheap disjointness tests (None = unknown/everywhere).
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Factor::Poly(p) => p.support(),
            Factor::GridVec(_) => None,
        }
    }

    /// Value at a point of the given space.
    pub fn eval(&self, space: &MeasureSpace, point: &[f64]) -> Result<f64> {
        match self {
            Factor::Poly(p) => Ok(p.eval(point[0])),
            Factor::GridVec(v) => {
                let idx = space.atom_index(point).ok_or(Error::NonAtomPoint)?;
                Ok(v[idx])
            }
        }
    }

    /// Value at grid atom `idx` (also defined for `Poly` factors).
    pub fn eval_atom(&self, space: &MeasureSpace, idx: usize) -> f64 {
        match self {
            Factor::Poly(p) => p.eval(space.atom_coord(idx)[0]),
            Factor::GridVec(v) => v[idx],
        }
    }

    /// Pointwise product of two factors on the same space.
    pub fn mul(&self, other: &Factor, space: &MeasureSpace) -> Result<Factor> {
        match (self, other) {
            (Factor::Poly(a), Factor::Poly(b)) => Ok(Factor::poly(a.mul(b))),
            _ => {
                let atoms = space.grid_len().ok_or(Error::GridFactorOnContinuum)?;
                let vals = (0..atoms)
                    .map(|i| self.eval_atom(space, i) * other.eval_atom(space, i))
                    .collect();
                Ok(Factor::grid_vec(vals))
            }
        }
    }
}

/// Supports are disjoint (a conservative test: false only when certain).
pub(crate) fn supports_disjoint(a: &Factor, b: &Factor) -> bool {
    match (a.support(), b.support()) {
        (Some((alo, ahi)), Some((blo, bhi))) => ahi <= blo || bhi <= alo,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Measure space
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceMode {
    Grid,
    Continuum,
}

#[derive(Debug, Clone)]
enum Repr {
    Grid {
        /// Flat coordinates, `dim`-strided.
        coords: Vec<f64>,
        weights: Vec<f64>,
    },
    Continuum {
        /// Piecewise-constant density pieces (coeffs.len() == 1 each).
        density: Vec<Piece>,
    },
}

/// A finite-mass control measure μ together with the intensity n; the
/// measure in force is μ_n = n·μ.
#[derive(Debug, Clone)]
pub struct MeasureSpace {
    dim: usize,
    intensity: f64,
    base_mass: f64,
    repr: Repr,
}

impl MeasureSpace {
    /// Grid-mode space from 1-d atoms and weights.
    pub fn grid_1d(points: Vec<f64>, weights: Vec<f64>, intensity: f64) -> Result<Self> {
        Self::grid(points, weights, 1, intensity)
    }

    /// Grid-mode space from flat `dim`-strided coordinates and weights.
    pub fn grid(coords: Vec<f64>, weights: Vec<f64>, dim: usize, intensity: f64) -> Result<Self> {
        if weights.is_empty() || coords.len() != weights.len() * dim {
            return Err(Error::EmptyAtomList);
        }
        if let Some(index) = weights.iter().position(|&w| w < 0.0) {
            return Err(Error::NegativeWeight { index });
        }
        if !(intensity > 0.0) {
            return Err(Error::NonpositiveIntensity);
        }
        let base_mass: f64 = weights.iter().sum();
        if !(base_mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(MeasureSpace { dim, intensity, base_mass, repr: Repr::Grid { coords, weights } })
    }

    /// Continuum-mode space on R with a piecewise-constant density.
    ///
    /// `density` lists (lo, hi, value) triples; the base mass is the integral.
    pub fn continuum_1d(density: Vec<(f64, f64, f64)>, intensity: f64) -> Result<Self> {
        if !(intensity > 0.0) {
            return Err(Error::NonpositiveIntensity);
        }
        if density.is_empty() {
            return Err(Error::ZeroMass);
        }
        if let Some(index) = density.iter().position(|&(_, _, p)| p < 0.0) {
            return Err(Error::NegativeWeight { index });
        }
        let mut pieces: Vec<Piece> = density
            .into_iter()
            .filter(|&(lo, hi, p)| hi > lo && p > 0.0)
            .map(|(lo, hi, p)| Piece { lo, hi, coeffs: vec![p] })
            .collect();
        pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite breakpoints"));
        let acc: f64 = pieces.iter().map(|p| p.coeffs[0] * (p.hi - p.lo)).sum();
        if !(acc > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(MeasureSpace {
            dim: 1,
            intensity,
            base_mass: acc,
            repr: Repr::Continuum { density: pieces },
        })
    }

    /// Uniform density p ≡ mass/(b−a) on (a, b); convenience constructor.
    pub fn uniform_1d(a: f64, b: f64, mass: f64, intensity: f64) -> Result<Self> {
        Self::continuum_1d(vec![(a, b, mass / (b - a))], intensity)
    }

    /// Same space with a different intensity multiplier.
    pub fn with_intensity(&self, intensity: f64) -> Result<Self> {
        if !(intensity > 0.0) {
            return Err(Error::NonpositiveIntensity);
        }
        let mut s = self.clone();
        s.intensity = intensity;
        Ok(s)
    }

    pub fn mode(&self) -> SpaceMode {
        match self.repr {
            Repr::Grid { .. } => SpaceMode::Grid,
            Repr::Continuum { .. } => SpaceMode::Continuum,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn base_mass(&self) -> f64 {
        self.base_mass
    }

    /// Total mass of the control measure in force, μ_n(Z) = n·μ(Z).
    pub fn mass_n(&self) -> f64 {
        self.intensity * self.base_mass
    }

    /// Number of grid atoms (None in continuum mode).
    pub fn grid_len(&self) -> Option<usize> {
        match &self.repr {
            Repr::Grid { weights, .. } => Some(weights.len()),
            Repr::Continuum { .. } => None,
        }
    }

    /// Base weights of the grid atoms.
    pub fn grid_weights(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Grid { weights, .. } => Some(weights),
            Repr::Continuum { .. } => None,
        }
    }

    pub(crate) fn density_pieces(&self) -> Option<&[Piece]> {
        match &self.repr {
            Repr::Continuum { density } => Some(density),
            Repr::Grid { .. } => None,
        }
    }

    /// Support hull of the continuum density (None in grid mode).
    pub fn density_support(&self) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Continuum { density } => {
                Some((density.first()?.lo, density.last()?.hi))
            }
            Repr::Grid { .. } => None,
        }
    }

    pub fn atom_coord(&self, idx: usize) -> &[f64] {
        match &self.repr {
            Repr::Grid { coords, .. } => &coords[idx * self.dim..(idx + 1) * self.dim],
            Repr::Continuum { .. } => panic!("atom_coord on continuum space"),
        }
    }

    /// Grid index of a point, matched to within 1e-12 per coordinate.
    pub fn atom_index(&self, point: &[f64]) -> Option<usize> {
        match &self.repr {
            Repr::Grid { coords, weights } => {
                let d = self.dim;
                (0..weights.len()).find(|&i| {
                    coords[i * d..(i + 1) * d]
                        .iter()
                        .zip(point)
                        .all(|(&a, &b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
                })
            }
            Repr::Continuum { .. } => None,
        }
    }

    /// ∫ g dμ_n for a factor (one n-factor per integration).
    pub fn integral(&self, g: &Factor) -> Result<f64> {
        match (&self.repr, g) {
            (Repr::Continuum { density }, Factor::Poly(p)) => {
                Ok(self.intensity * p.integral_against(density))
            }
            (Repr::Continuum { .. }, Factor::GridVec(_)) => Err(Error::GridFactorOnContinuum),
            (Repr::Grid { weights, .. }, _) => {
                let mut s = 0.0;
                for i in 0..weights.len() {
                    if weights[i] != 0.0 {
                        s += weights[i] * g.eval_atom(self, i);
                    }
                }
                Ok(self.intensity * s)
            }
        }
    }

    /// Gram product ⟨g, h⟩ under μ_n.
    pub fn gram(&self, g: &Factor, h: &Factor) -> Result<f64> {
        if supports_disjoint(g, h) {
            return Ok(0.0);
        }
        match (&self.repr, g, h) {
            (Repr::Continuum { density }, Factor::Poly(a), Factor::Poly(b)) => {
                Ok(self.intensity * gram_poly(a, b, density))
            }
            (Repr::Continuum { .. }, _, _) => Err(Error::GridFactorOnContinuum),
            (Repr::Grid { weights, .. }, _, _) => {
                let mut s = 0.0;
                for i in 0..weights.len() {
                    if weights[i] != 0.0 {
                        s += weights[i] * g.eval_atom(self, i) * h.eval_atom(self, i);
                    }
                }
                Ok(self.intensity * s)
            }
        }
    }
}

/// ∫ a·b·p dx without materialising the product polynomial.
fn gram_poly(a: &PiecewisePoly, b: &PiecewisePoly, density: &[Piece]) -> f64 {
    let mut total = 0.0;
    for pa in a.pieces() {
        for pb in b.pieces() {
            let lo0 = pa.lo.max(pb.lo);
            let hi0 = pa.hi.min(pb.hi);
            if hi0 <= lo0 {
                continue;
            }
            for d in density {
                let lo = lo0.max(d.lo);
                let hi = hi0.min(d.hi);
                if hi <= lo {
                    continue;
                }
                let p = d.coeffs[0];
                let mut seg = 0.0;
                for (i, &ca) in pa.coeffs.iter().enumerate() {
                    if ca == 0.0 {
                        continue;
                    }
                    for (j, &cb) in pb.coeffs.iter().enumerate() {
                        if cb == 0.0 {
                            continue;
                        }
                        let k = (i + j + 1) as f64;
                        seg += ca * cb * (powi(hi, i + j + 1) - powi(lo, i + j + 1)) / k;
                    }
                }
                total += p * seg;
            }
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// One separable term c·g₁⊗…⊗g_q.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

/// Optional fast-path metadata: term `t` of a separable kernel is supported
/// in cell `t` of a regular partition of [lo, hi). Lets pathwise evaluation
/// touch one term per sample point instead of all of them.
#[derive(Debug, Clone, Copy)]
pub struct BinIndex {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl BinIndex {
    pub fn cell(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        let c = ((x - self.lo) / (self.hi - self.lo) * self.cells as f64) as usize;
        Some(c.min(self.cells - 1))
    }
}

#[derive(Debug, Clone)]
pub enum KernelRepr {
    /// Plain multilinear sum of separable terms (not implicitly symmetrised;
    /// constructors that need symmetric functions build symmetric term lists).
    Separable(Vec<Term>),
    /// Row-major values over grid atoms, shape [atoms; q].
    DenseGrid(Vec<f64>),
}

/// A kernel of order q on a measure space.
#[derive(Debug, Clone)]
pub struct Kernel {
    order: usize,
    repr: KernelRepr,
    bins: Option<BinIndex>,
}

impl Kernel {
    pub fn separable(order: usize, terms: Vec<Term>) -> Self {
        debug_assert!(terms.iter().all(|t| t.factors.len() == order));
        Kernel { order, repr: KernelRepr::Separable(terms), bins: None }
    }

    /// c·e^{⊗q}.
    pub fn rank_one(order: usize, coeff: f64, factor: Factor) -> Self {
        Kernel::separable(order, vec![Term { coeff, factors: vec![factor; order] }])
    }

    /// Σᵢ cᵢ·eᵢ^{⊗q} for a list of (cᵢ, eᵢ).
    pub fn rank_sum(order: usize, terms: Vec<(f64, Factor)>) -> Self {
        let terms = terms
            .into_iter()
            .map(|(coeff, e)| Term { coeff, factors: vec![e; order] })
            .collect();
        Kernel::separable(order, terms)
    }

    pub fn zero(order: usize) -> Self {
        Kernel::separable(order, Vec::new())
    }

    /// Order-0 kernel (a scalar).
    pub fn scalar(value: f64) -> Self {
        Kernel::separable(0, vec![Term { coeff: value, factors: Vec::new() }])
    }

    pub fn dense_grid(order: usize, data: Vec<f64>, space: &MeasureSpace) -> Result<Self> {
        let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
        let expected = atoms.pow(order as u32);
        if data.len() != expected {
            return Err(Error::ArityMismatch { expected, got: data.len() });
        }
        Ok(Kernel { order, repr: KernelRepr::DenseGrid(data), bins: None })
    }

    pub fn with_bins(mut self, bins: BinIndex) -> Self {
        self.bins = Some(bins);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn repr(&self) -> &KernelRepr {
        &self.repr
    }

    pub fn bins(&self) -> Option<&BinIndex> {
        self.bins.as_ref()
    }

    pub fn terms(&self) -> Option<&[Term]> {
        match &self.repr {
            KernelRepr::Separable(t) => Some(t),
            KernelRepr::DenseGrid(_) => None,
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.repr, KernelRepr::Separable(_))
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            KernelRepr::Separable(t) => t.is_empty() || t.iter().all(|t| t.coeff == 0.0),
            KernelRepr::DenseGrid(d) => d.iter().all(|&x| x == 0.0),
        }
    }

    /// Value of an order-0 kernel.
    pub fn scalar_value(&self) -> f64 {
        debug_assert_eq!(self.order, 0);
        match &self.repr {
            KernelRepr::Separable(terms) => terms.iter().map(|t| t.coeff).sum(),
            KernelRepr::DenseGrid(d) => d.first().copied().unwrap_or(0.0),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let repr = match &self.repr {
            KernelRepr::Separable(terms) => KernelRepr::Separable(
                terms
                    .iter()
                    .map(|t| Term { coeff: t.coeff * c, factors: t.factors.clone() })
                    .collect(),
            ),
            KernelRepr::DenseGrid(d) => KernelRepr::DenseGrid(d.iter().map(|&x| x * c).collect()),
        };
        Kernel { order: self.order, repr, bins: self.bins }
    }

    /// Kernel sum (orders must match).
    pub fn add(&self, other: &Kernel, space: &MeasureSpace) -> Result<Kernel> {
        if self.order != other.order {
            return Err(Error::OrderMismatch { left: self.order, right: other.order });
        }
        match (&self.repr, &other.repr) {
            (KernelRepr::Separable(a), KernelRepr::Separable(b)) => {
                let mut terms = a.clone();
                terms.extend_from_slice(b);
                Ok(Kernel::separable(self.order, terms))
            }
            _ => {
                let a = self.to_dense(space)?;
                let b = other.to_dense(space)?;
                let (KernelRepr::DenseGrid(da), KernelRepr::DenseGrid(db)) = (&a.repr, &b.repr)
                else {
                    unreachable!()
                };
                let data = da.iter().zip(db).map(|(&x, &y)| x + y).collect();
                Ok(Kernel { order: self.order, repr: KernelRepr::DenseGrid(data), bins: None })
            }
        }
    }

    /// Drop separable terms with |coeff| < PRUNE_EPS · max|coeff| or with a
    /// zero factor. Keeps repeated contraction chains tractable.
    pub fn prune(&mut self) {
        if let KernelRepr::Separable(terms) = &mut self.repr {
            let max = terms.iter().fold(0.0_f64, |m, t| m.max(t.coeff.abs()));
            if max == 0.0 {
                terms.clear();
                return;
            }
            let cut = PRUNE_EPS * max;
            terms.retain(|t| t.coeff.abs() >= cut && !t.factors.iter().any(Factor::is_zero));
        }
    }

    /// Plain (unsymmetrised) value of the represented function at `args`.
    pub fn eval_plain(&self, space: &MeasureSpace, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.order {
            return Err(Error::ArityMismatch { expected: self.order, got: args.len() });
        }
        match &self.repr {
            KernelRepr::Separable(terms) => {
                let mut v = 0.0;
                for t in terms {
                    let mut prod = t.coeff;
                    for (g, &x) in t.factors.iter().zip(args) {
                        if prod == 0.0 {
                            break;
                        }
                        prod *= g.eval(space, x)?;
                    }
                    v += prod;
                }
                Ok(v)
            }
            KernelRepr::DenseGrid(data) => {
                let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
                let mut idx = 0usize;
                for &x in args {
                    let i = space.atom_index(x).ok_or(Error::NonAtomPoint)?;
                    idx = idx * atoms + i;
                }
                Ok(data[idx])
            }
        }
    }

    /// Value of the symmetrised kernel at `args` (average over argument
    /// permutations).
    pub fn eval_sym(&self, space: &MeasureSpace, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.order {
            return Err(Error::ArityMismatch { expected: self.order, got: args.len() });
        }
        if self.order <= 1 {
            return self.eval_plain(space, args);
        }
        let mut perm: Vec<usize> = (0..self.order).collect();
        let mut sum = 0.0;
        let mut count = 0.0;
        let mut scratch: Vec<&[f64]> = args.to_vec();
        permute_all(&mut perm, &mut |p| {
            for (slot, &src) in p.iter().enumerate() {
                scratch[slot] = args[src];
            }
            sum += self.eval_plain(space, &scratch).unwrap_or(f64::NAN);
            count += 1.0;
        });
        Ok(sum / count)
    }

    /// Densify onto the grid of `space` (plain values, no symmetrisation).
    pub fn to_dense(&self, space: &MeasureSpace) -> Result<Kernel> {
        let atoms = space.grid_len().ok_or(Error::GridReprNeedsGridSpace)?;
        if let KernelRepr::DenseGrid(_) = self.repr {
            return Ok(self.clone());
        }
        let KernelRepr::Separable(terms) = &self.repr else { unreachable!() };
        let q = self.order;
        let len = atoms.pow(q as u32);
        let mut data = vec![0.0; len];
        // Per-term factor value tables, then an outer product accumulation.
        for t in terms {
            let tables: Vec<Vec<f64>> = t
                .factors
                .iter()
                .map(|g| (0..atoms).map(|i| g.eval_atom(space, i)).collect())
                .collect();
            for (flat, slot) in data.iter_mut().enumerate() {
                let mut v = t.coeff;
                let mut rem = flat;
                for a in (0..q).rev() {
                    v *= tables[a][rem % atoms];
                    rem /= atoms;
                }
                *slot += v;
            }
        }
        Ok(Kernel { order: q, repr: KernelRepr::DenseGrid(data), bins: None })
    }
}

// ---------------------------------------------------------------------------
// Chaos expansions
// ---------------------------------------------------------------------------

/// A finite chaos expansion F = c₀ + Σ_q I_q(f_q), stored as the constant
/// plus a map order → kernel. All component kernels live on one space; its
/// L² norm² is c₀² + Σ_q q!·‖f_q‖² by the isometry.
#[derive(Debug, Clone, Default)]
pub struct ChaosExpansion {
    pub constant: f64,
    pub components: alloc::collections::BTreeMap<usize, Kernel>,
}

impl ChaosExpansion {
    pub fn constant_only(c: f64) -> Self {
        ChaosExpansion { constant: c, components: alloc::collections::BTreeMap::new() }
    }

    pub fn insert(&mut self, order: usize, kernel: Kernel) {
        debug_assert_eq!(kernel.order(), order);
        self.components.insert(order, kernel);
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.components.values().all(Kernel::is_zero)
    }
}

/// Call `f` with every permutation of `items` (Heap's algorithm).
pub(crate) fn permute_all<T, F: FnMut(&[T])>(items: &mut [T], f: &mut F) {
    let n = items.len();
    if n == 0 {
        f(items);
        return;
    }
    let mut c = vec![0usize; n];
    f(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            f(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
