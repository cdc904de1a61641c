//! Oriented simplicial complexes, their incidence structure, boundary
//! classification, barycentric dual and exact topological invariants.

pub mod boundary;
pub mod complex;
pub mod dual;
pub mod generate;
pub mod incidence;
pub mod io;
pub mod topology;

pub use boundary::{classify_boundary, BoundaryClassification};
pub use complex::SimplicialComplex;
pub use dual::{barycentric_dual, transpose_sign, DualComplex};
pub use incidence::{incidence, incidences, IncidenceMatrix};
pub use io::{load_mesh, write_mesh};
pub use topology::{betti_numbers, euler_audit, Betti, EulerReport};
