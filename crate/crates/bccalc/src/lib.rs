//! Chart-local calculus for graded bundles with flat ∂̄-superconnections.
//!
//! The crate builds Chern superconnections from Hermitian metrics on
//! cohesive modules, computes their Bott-Chern characteristic forms, and
//! verifies the transgression identities relating them — exactly, over
//! truncated-jet coefficients with Gaussian-rational scalars. A numeric
//! (complex `f64`) mode drives the heat-trace integral for acyclic modules.
//!
//! Everything is generic over the coefficient [`scalar::Scalar`]; the
//! aliases below fix the two concrete modes.

pub mod error;
pub mod scalar;
pub mod jet;
pub mod form;
pub mod bundle;
pub mod randgen;
pub mod superconn;
pub mod chern;
pub mod corpus;
pub mod check;
pub mod families;

pub use error::{CalcError, Result};
pub use scalar::{Exact, Numeric, Scalar};

/// Exact-mode jet (Gaussian rational coefficients).
pub type EJet = jet::Jet<Exact>;
/// Numeric-mode jet (complex double coefficients).
pub type NJet = jet::Jet<Numeric>;
