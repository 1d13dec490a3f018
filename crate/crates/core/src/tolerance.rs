//! Numerical tolerances shared by every module.

/// Single algebraic operations: Hermiticity, normalization of inputs,
/// exact commutation.
pub const ALGEBRAIC: f64 = 1e-12;

/// Quantities accumulated through products, sums and eigendecompositions:
/// unitarity, propagated norms, probability sums.
pub const ACCUMULATED: f64 = 1e-10;

/// Maximum drift of an observable when the Fock cutoff is raised by
/// [`TRUNCATION_PROBE_EXTRA_LEVELS`].
pub const TRUNCATION_DRIFT: f64 = 1e-8;

/// Extra Fock levels used when checking truncation convergence.
pub const TRUNCATION_PROBE_EXTRA_LEVELS: usize = 4;
