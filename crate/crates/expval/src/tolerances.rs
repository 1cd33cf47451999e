//! Pinned numerical tolerances.
//!
//! These values are part of the crate's contract: tests and the acceptance
//! suite assert against them, and loosening one is an API-level change.

/// Max entrywise deviation from Hermiticity accepted when an operator or an
/// assembled Hamiltonian claims to be Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Max entrywise deviation of `U'U` from the identity for slice-product
/// propagators. Eigendecomposition-based exponentials sit far below this.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Bilinearity and antisymmetry of the commutator on unit-scale random
/// operators; pure roundoff, so very tight.
pub const COMMUTATOR_LINEARITY_TOL: f64 = 1e-13;

/// Jacobi identity on random operator triples; two nested products deep, so
/// one order looser than plain bilinearity.
pub const JACOBI_TOL: f64 = 1e-12;

/// Residual below which a commutator family counts as closed over a basis,
/// measured on the safe subspace.
pub const CLOSURE_TOL: f64 = 1e-9;

/// Imaginary part allowed on an expectation of a Hermitian-flagged operator.
pub const EXPECTATION_IMAG_TOL: f64 = 1e-12;

/// Imaginary part allowed on an assembled series order term for a Hermitian
/// observable (sums over many slices accumulate a little more roundoff).
pub const ORDER_TERM_IMAG_TOL: f64 = 1e-10;

/// Gram-matrix condition number beyond which a projection basis is rejected.
pub const GRAM_CONDITION_CAP: f64 = 1e12;

/// Inter-grid stabilization target for the exact-propagator expectation.
pub const EXACT_STABILIZATION_TOL: f64 = 1e-10;

/// Default total-dimension cap for truncated product spaces; keeps dense
/// matrices at desk scale.
pub const DIM_CAP: usize = 4096;

/// Highest Dyson order supported; the state-correction bookkeeping is only
/// exercised and cross-validated this far.
pub const DYSON_ORDER_CAP: usize = 4;
