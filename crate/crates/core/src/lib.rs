//! Canonical-form analysis of the Rabi Hamiltonian in Bargmann space.
//!
//! The crate turns the two-level Rabi system into a linear ODE system
//! with an irregular singular point at infinity, reduces it to Birkhoff
//! canonical form by an explicit order-by-order recurrence, and cross
//! checks everything against a truncated Fock-space diagonalization.
//! The pieces:
//!
//! - [`series`]: truncated Laurent and matrix series arithmetic,
//! - [`birkhoff`]: the canonicalization engine,
//! - [`rabi`]: the Rabi system builder and its singularity data,
//! - [`kummer`]: confluent hypergeometric solutions of the canonical
//!   system and Bargmann growth checks,
//! - [`oracle`]: truncated Fock-space spectra with parity resolution,
//! - [`juddian`]: exact terminating solutions and their validation,
//! - [`sweep`]: parallel parameter-grid driving.

pub mod birkhoff;
pub mod juddian;
pub mod kummer;
pub mod oracle;
pub mod rabi;
pub mod series;
pub mod sweep;

pub use birkhoff::{
    canonical_polynomials, leading_coefficient, order_residuals, recurrence_solve,
    verify_canonicalization, BirkhoffError, CanonicalSystem, SystemDescriptor, TransformSeries,
};
pub use juddian::{
    baseline_curve_n1, baseline_curve_n2, reconstruct_eigenfunction, solve_terminating,
    subspace_overlap, terminating_equations, validate_point, ConstraintPolynomial, JuddianError,
    JuddianPoint, NewtonSeed, Reconstruction, TerminatingSystem, ValidationReport,
};
pub use series::{laurent_expand_rational, CMat, LaurentMatrixSeries, PolynomialMatrix};

pub use num_complex::Complex64;
