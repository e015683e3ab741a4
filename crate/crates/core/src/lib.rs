//! Poisson-chaos toolkit: exact contraction-kernel algebra, quantitative
//! centred-Gamma/Normal/Poisson approximation bounds for Poisson functionals,
//! and pathwise simulation of multiple Wiener-Itô integrals and U-statistics.
//!
//! The crate is organised around a small set of building blocks:
//!
//! * [`space`] — finite-mass control measures and the two kernel
//!   representations (separable closed forms, dense grids);
//! * [`contract`] — contractions `f ⋆_r^l g`, symmetrisation, norms and the
//!   product-formula kernels `G_p^q f`;
//! * [`stein_gamma`] — the centred Gamma target, its Stein solution and the
//!   smoothness constants;
//! * [`bounds`] — the quantitative bound terms (A₁′, A₃, A₄, A₅, B_n, C_n)
//!   assembled exactly from contraction algebra;
//! * [`chaos_sim`] — Poisson sampling, pathwise evaluation of multiple
//!   integrals, U-statistics, disk-graph counts and empirical distances.
//!
//! Everything is deterministic given a seed: samplers take an explicit
//! random stream (see [`rng`]), and all algebra is exact up to floating
//! error. The crate is `no_std`-compatible (with `alloc`); the companion
//! CLI crate carries IO, file formats and the experiment harness.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bounds;
pub mod chaos_sim;
pub mod contract;
pub mod error;
pub mod quad;
pub mod rng;
pub mod space;
pub mod special;
pub mod stein_gamma;

pub use error::Error;
pub use space::{Factor, Kernel, MeasureSpace};

/// Default cap on kernel orders accepted by the symmetrisation-heavy
/// operations (the `q!`-term expansions become intractable beyond this).
pub const ORDER_CAP: usize = 6;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
