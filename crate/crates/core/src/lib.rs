//! Numerical workbench for Laplace-Beltrami eigenfunctions on closed surfaces.
//!
//! The crate builds eigenpairs (closed-form families on the unit sphere and
//! flat torus, a cotangent-FEM solver on general triangle meshes), extracts
//! and measures their nodal sets, decomposes the surface into geodesic
//! pixels with centers on the nodal set, and evaluates the quantitative
//! functionals attached to that decomposition: Dong's upper bound, per-pixel
//! nodal density, Harnack/Bernstein ratios, weighted Hardy constants,
//! Lojasiewicz exponents, harmonic-approximation contraction, and the
//! phase-amplitude splitting along rays.

pub mod estimates;
pub mod inequalities;
pub mod mesh;
pub mod nodal;
pub mod pixelize;
pub mod region;
pub mod riccati;
pub mod sparse;
pub mod spectral;
pub mod spharm;
pub mod surface;

mod vec3;

pub use mesh::TriangleMesh;
pub use surface::{Surface, SurfaceKind};

/// Errors shared across the workbench modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("conjugate point: |h| blew up at r = {radius}")]
    ConjugatePoint { radius: f64 },
    #[error("solver did not converge: {context} (attained residuals {residuals:?})")]
    Solver {
        context: String,
        residuals: Vec<f64>,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }
}
