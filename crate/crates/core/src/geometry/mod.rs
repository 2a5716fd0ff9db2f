//! Outer domain, polygonal inclusion, boundary perturbations with their
//! extensions, and the interface-conforming graded mesher.

mod cdt;
mod extension;
mod mesh;
mod outer;
mod perturbation;
mod polygon;
mod vec2;

pub use cdt::Triangulation;
pub use extension::ExtensionField;

pub use mesh::{generate_mesh, InterfaceEdge, Mesh, MeshOptions, MeshQuality, NodeTag, PointLocator, Region};
pub use outer::OuterDomain;
pub use perturbation::{deform, PerturbationField};
pub use polygon::{equal_area_ngon, square, Polygon};
pub use vec2::{segment_distance, segments_intersect, Vec2};
pub(crate) use vec2::coord;
