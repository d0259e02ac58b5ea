//! Solver library for unsteady Riesz space-fractional diffusion equations
//! with non-separable variable coefficients.
//!
//! The implicit time discretization of such an equation produces, at every
//! time step, a linear system whose matrix is an identity plus a sum of
//! diagonal-times-multilevel-Toeplitz terms, one per spatial dimension.
//! Everything here is built around exploiting that structure:
//!
//! * [`coefficients`] — the discretization coefficient sequences of the three
//!   supported finite-difference schemes, plus validation of their sign,
//!   decay and partial-sum properties.
//! * [`transforms`] — O(M log M) kernels: orthonormal DST-I, tau-matrix
//!   eigenvalues, FFT-based symmetric Toeplitz products, and application of
//!   any 1-D kernel along an axis of a multi-dimensional grid vector.
//! * [`operator`] — the matrix-free system operator and small dense oracles.
//! * [`preconditioners`] — the tau preconditioner (exactly invertible through
//!   sine transforms) and a Strang circulant baseline.
//! * [`krylov`] — left-preconditioned GMRES with residual history.
//! * [`problems`] — manufactured benchmark problems and the sequential
//!   time-stepping driver with warm starts.
//! * [`analysis`] — numerical verification of the spectral bounds and the
//!   convergence-rate constants of the preconditioned iteration.
//! * [`verification`] — an aggregated, machine-readable check suite.

// Argument guards are written as !(x > 0.0) on purpose: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Frozen reference constants keep every published digit.
#![allow(clippy::excessive_precision)]

pub mod analysis;
pub mod coefficients;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod operator;
pub mod preconditioners;
pub mod problems;
pub mod transforms;
pub mod verification;

mod rng;

pub use coefficients::{CoefficientSequence, Scheme};
pub use error::{Error, Result};
pub use krylov::{gmres, KrylovResult, ResidualReference, SolverConfig};
pub use operator::{Grid, SfdeOperator};
pub use preconditioners::{CirculantPreconditioner, TauPreconditioner};
pub use problems::{ProblemSpec, SolveReport};
pub use transforms::{GridShape, ToeplitzSymbol};
