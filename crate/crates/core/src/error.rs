//! Error type shared by the algebra and simulation modules.

use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A grid space needs at least one atom.
    EmptyAtomList,
    /// Quadrature weights must be nonnegative.
    NegativeWeight { index: usize },
    /// The intensity multiplier n must be strictly positive.
    NonpositiveIntensity,
    /// The base measure must have strictly positive total mass.
    ZeroMass,
    /// Number of arguments does not match the kernel order.
    ArityMismatch { expected: usize, got: usize },
    /// Dense-grid kernels can only be evaluated at grid atoms.
    NonAtomPoint,
    /// Dense-grid kernels require a grid-mode space.
    GridReprNeedsGridSpace,
    /// Grid-vector factors require a grid-mode space.
    GridFactorOnContinuum,
    /// Kernel orders do not match.
    OrderMismatch { left: usize, right: usize },
    /// Contraction indices must satisfy 0 <= l <= r <= q.
    ContractionRange { q: usize, r: usize, l: usize },
    /// The operation is defined for even orders only.
    OddOrder { q: usize },
    /// Product-formula index p must lie in 0..=2q.
    ProductOrderRange { q: usize, p: usize },
    /// Moments are implemented for k in 1..=4.
    MomentOrderRange { k: usize },
    /// Kernel order exceeds the configured cap.
    OrderCapExceeded { q: usize, cap: usize },
    /// Adaptive quadrature failed to reach the requested tolerance.
    QuadratureNonConvergence,
    /// An operation received an empty sample or dictionary.
    EmptyInput,
    /// The kernel is not completely degenerate under the base measure.
    NotDegenerate { defect: f64 },
    /// Hybrid order constraint `2·q_gamma != q_other` violated.
    HybridOrderConflict { q1: usize, q2: usize },
    /// Hoeffding projection index out of 1..=k.
    ProjectionRange { k: usize, i: usize },
    /// Factor values are only defined on the owning space.
    SpaceMismatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyAtomList => write!(f, "grid space needs at least one atom"),
            Error::NegativeWeight { index } => {
                write!(f, "negative quadrature weight at atom {index}")
            }
            Error::NonpositiveIntensity => write!(f, "intensity must be > 0"),
            Error::ZeroMass => write!(f, "base measure must have positive total mass"),
            Error::ArityMismatch { expected, got } => {
                write!(f, "kernel of order {expected} evaluated with {got} arguments")
            }
            Error::NonAtomPoint => write!(f, "dense-grid kernel evaluated off the grid"),
            Error::GridReprNeedsGridSpace => {
                write!(f, "dense-grid representation requires a grid-mode space")
            }
            Error::GridFactorOnContinuum => {
                write!(f, "grid-vector factor used on a continuum space")
            }
            Error::OrderMismatch { left, right } => {
                write!(f, "kernel orders differ: {left} vs {right}")
            }
            Error::ContractionRange { q, r, l } => {
                write!(f, "contraction indices (r={r}, l={l}) invalid for order {q}")
            }
            Error::OddOrder { q } => write!(f, "operation requires an even order, got {q}"),
            Error::ProductOrderRange { q, p } => {
                write!(f, "product-formula order p={p} outside 0..={}", 2 * q)
            }
            Error::MomentOrderRange { k } => write!(f, "moment order {k} outside 1..=4"),
            Error::OrderCapExceeded { q, cap } => {
                write!(f, "kernel order {q} exceeds cap {cap}")
            }
            Error::QuadratureNonConvergence => write!(f, "quadrature did not converge"),
            Error::EmptyInput => write!(f, "empty input"),
            Error::NotDegenerate { defect } => {
                write!(f, "kernel is not completely degenerate (defect {defect:e})")
            }
            Error::HybridOrderConflict { q1, q2 } => {
                write!(f, "hybrid orders violate 2q_i != q_j: q1={q1}, q2={q2}")
            }
            Error::ProjectionRange { k, i } => {
                write!(f, "projection index {i} outside 1..={k}")
            }
            Error::SpaceMismatch => write!(f, "kernel does not live on this space"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
