//! Corner fits, the verification campaign and vertex reconstruction.

mod campaign;
mod fit;
mod recon;

pub use campaign::*;
pub use fit::{default_radii, estimate_beta, log_slope, mesh_layers, CornerFit};
pub use recon::{jacobian_columns, moved_vertex, reconstruct, synthetic_data, LogRow, Measurement, ReconOptions, ReconstructionState, StopReason};
