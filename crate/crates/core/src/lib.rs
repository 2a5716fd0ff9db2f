//! Shape derivatives of a polygonal conductivity inclusion.

pub mod corner;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod model;
pub mod quadrature;
pub mod shape;
pub mod transmission;
pub mod verify;

pub use corner::{gamma_roots, Contrast, CornerSpectrum, SingularFunction};
pub use fem::{boundary_trace, BoundaryFunction, FemField, FemSolver};
pub use model::Model;
pub use error::{Error, Result};
pub use geometry::{
    deform, generate_mesh, ExtensionField, Mesh, MeshOptions, OuterDomain, PerturbationField, Polygon, Region, Vec2,
};

/// Worker threads for the sparse factorizations: `1` runs sequentially, `0`
/// uses every available core.
pub fn set_threads(n: usize) {
    faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
}
