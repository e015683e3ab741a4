//! Sampling and pathwise evaluation of Poisson functionals.
//!
//! [`sample`] draws one Poisson configuration η with control measure
//! μ_n = n·μ: grid mode draws per-atom Poisson counts (sites carry
//! multiplicities), continuum mode draws a Poisson(n·μ(Z)) total and i.i.d.
//! points from μ/μ(Z). The [`pathwise`] submodule evaluates U-statistics,
//! multiple Wiener-Itô integrals (via the inclusion–exclusion inversion of
//! the chaos decomposition of U-statistics) and Malliavin derivatives on a
//! configuration; [`disk`] counts disk-graph subgraphs; [`dist`] computes
//! empirical distances to the Gamma/Normal/Poisson targets.

pub mod disk;
pub mod dist;
pub mod pathwise;

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::Distribution;

use crate::space::{MeasureSpace, SpaceMode};

pub use disk::{disk_graph_stat, Pattern};
pub use dist::{empirical_distances, DistanceRecord, TargetDist};
pub use pathwise::{
    chaos_eval, degeneracy_defect, derivative_eval, hoeffding_projection, hoeffding_rank,
    multiple_integral_eval, ustat_direct, ustat_eval,
};

/// One realization of the Poisson process.
///
/// Sites are stored flat (`dim`-strided); grid-mode sites carry
/// multiplicities (atoms may be hit several times), continuum-mode sites are
/// almost surely distinct — [`PoissonSample::duplicate_sites`] exists as a
/// diagnostic, duplicates are never silently merged.
#[derive(Debug, Clone, Default)]
pub struct PoissonSample {
    coords: Vec<f64>,
    mult: Vec<f64>,
    atom_idx: Option<Vec<usize>>,
    dim: usize,
    count: u64,
}

impl PoissonSample {
    pub fn clear(&mut self, dim: usize, grid: bool) {
        self.coords.clear();
        self.mult.clear();
        self.dim = dim;
        self.count = 0;
        match (grid, &mut self.atom_idx) {
            (true, Some(v)) => v.clear(),
            (true, None) => self.atom_idx = Some(Vec::new()),
            (false, slot) => *slot = None,
        }
    }

    /// Number of distinct sites.
    pub fn sites(&self) -> usize {
        self.mult.len()
    }

    /// Total number of points N (sum of multiplicities).
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mult(&self, i: usize) -> f64 {
        self.mult[i]
    }

    pub fn atom(&self, i: usize) -> Option<usize> {
        self.atom_idx.as_ref().map(|v| v[i])
    }

    pub fn push(&mut self, point: &[f64], mult: u64, atom: Option<usize>) {
        debug_assert_eq!(point.len(), self.dim);
        self.coords.extend_from_slice(point);
        self.mult.push(mult as f64);
        self.count += mult;
        if let Some(v) = &mut self.atom_idx {
            v.push(atom.expect("grid sample needs atom indices"));
        }
    }

    /// Diagnostic: number of coincident site pairs (continuum duplicates
    /// have probability zero; a positive value flags a broken sampler).
    pub fn duplicate_sites(&self) -> usize {
        let n = self.sites();
        let mut dups = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.site(i) == self.site(j) {
                    dups += 1;
                }
            }
        }
        dups
    }
}

/// Draw one configuration from the space's control measure μ_n.
pub fn sample<R: Rng + ?Sized>(space: &MeasureSpace, rng: &mut R) -> PoissonSample {
    let mut s = PoissonSample::default();
    sample_into(space, rng, &mut s);
    s
}

/// Like [`sample`], reusing the sample's buffers.
pub fn sample_into<R: Rng + ?Sized>(space: &MeasureSpace, rng: &mut R, out: &mut PoissonSample) {
    let n = space.intensity();
    match space.mode() {
        SpaceMode::Grid => {
            out.clear(space.dim(), true);
            let weights = space.grid_weights().expect("grid mode");
            for (a, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let mean = n * w;
                let c = rand_distr::Poisson::new(mean).expect("positive mean").sample(rng);
                let c = c as u64;
                if c > 0 {
                    let coord: Vec<f64> = space.atom_coord(a).to_vec();
                    out.push(&coord, c, Some(a));
                }
            }
        }
        SpaceMode::Continuum => {
            out.clear(space.dim(), false);
            let total = rand_distr::Poisson::new(space.mass_n())
                .expect("positive mass")
                .sample(rng) as u64;
            for _ in 0..total {
                let x = sample_point(space, rng);
                out.push(&[x], 1, None);
            }
        }
    }
}

/// Like [`sample_into`] for continuum spaces, but emits the points in
/// coordinate order without sorting: sorted uniforms come from normalized
/// cumulative exponential spacings, then the monotone inverse-CDF transform
/// maps them to the density. Law-equal to [`sample_into`] (a Poisson process
/// is a point set); statistics that scan neighbours can then run in one
/// pass.
pub fn sample_into_sorted<R: Rng + ?Sized>(
    space: &MeasureSpace,
    rng: &mut R,
    out: &mut PoissonSample,
) {
    debug_assert_eq!(space.mode(), SpaceMode::Continuum);
    out.clear(space.dim(), false);
    let total =
        rand_distr::Poisson::new(space.mass_n()).expect("positive mass").sample(rng) as u64;
    if total == 0 {
        return;
    }
    // N sorted uniforms from N+1 exponential spacings.
    let mut acc = 0.0f64;
    for _ in 0..total {
        acc += exp_draw(rng);
        out.push(&[acc], 1, None);
    }
    acc += exp_draw(rng);
    let pieces = space.density_pieces().expect("continuum mode");
    let mass = space.base_mass();
    let mut piece = 0usize;
    let mut cum = 0.0;
    for i in 0..out.mult.len() {
        let u = out.coords[i] / acc * mass;
        while piece + 1 < pieces.len()
            && cum + pieces[piece].coeffs[0] * (pieces[piece].hi - pieces[piece].lo) < u
        {
            cum += pieces[piece].coeffs[0] * (pieces[piece].hi - pieces[piece].lo);
            piece += 1;
        }
        let p = &pieces[piece];
        out.coords[i] = p.lo + (u - cum).max(0.0) / p.coeffs[0];
    }
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// One point from the normalized base measure μ/μ(Z) (continuum mode).
pub fn sample_point<R: Rng + ?Sized>(space: &MeasureSpace, rng: &mut R) -> f64 {
    let pieces = space.density_pieces().expect("continuum mode");
    let u: f64 = rng.random::<f64>() * space.base_mass();
    let mut acc = 0.0;
    for p in pieces {
        let mass = p.coeffs[0] * (p.hi - p.lo);
        if u <= acc + mass || core::ptr::eq(p, pieces.last().unwrap()) {
            return p.lo + (u - acc).max(0.0) / p.coeffs[0];
        }
        acc += mass;
    }
    unreachable!()
}
