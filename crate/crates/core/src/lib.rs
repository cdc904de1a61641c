//! Discrete exterior calculus on irregular tetrahedral lattices.
//!
//! The crate builds oriented chain complexes from tetrahedral meshes, the
//! lowest-order Whitney forms on them, Galerkin Hodge-star matrices, and on
//! top of those a semi-discrete Maxwell solver, a frequency-domain PML, a
//! charge-conserving particle coupling and a set of structural audits.

pub mod audit;
pub mod dof;
pub mod error;
pub mod hodge;
pub mod maxwell;
pub mod mesh;
pub mod pic;
pub mod pml;
pub mod quadrature;
pub mod sparse;
pub mod whitney;

pub use error::{Error, Result};
