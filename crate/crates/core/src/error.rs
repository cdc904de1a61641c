use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("tet {tet} is degenerate (signed volume {volume:e})")]
    DegenerateTet { tet: usize, volume: f64 },

    #[error("tet {tet} references vertex {vertex} but the mesh has {count} vertices")]
    DanglingVertex {
        tet: usize,
        vertex: usize,
        count: usize,
    },

    #[error("vertex {0} is not referenced by any tet")]
    UnreferencedVertex(usize),

    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteVertex(usize),

    #[error("mesh has no tets")]
    EmptyMesh,

    #[error("face {face} {vertices:?} has {cofaces} incident tets (non-manifold)")]
    NonManifold {
        face: usize,
        vertices: [usize; 3],
        cofaces: usize,
    },

    #[error("mesh is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("point {0:?} lies outside the mesh")]
    OutsideMesh([f64; 3]),

    #[error("material tensor on tet {tet} is not symmetric positive definite")]
    NotSpd { tet: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("restricted least-squares block for column {column} is singular")]
    SingularSpaiBlock { column: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("simulation diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    UnstableTimestep { dt: f64, bound: f64 },

    #[error("integer overflow during exact elimination")]
    Overflow,

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
