//! One inclusion configuration on one mesh: solver, corner data, gradient
//! recovery and interface quadrature, built once and shared by every route.

use std::sync::Arc;

use crate::corner::{Contrast, CornerSpectrum};
use crate::error::{Error, Result};
use crate::fem::{boundary_trace, nodal_extension, BoundaryFunction, FemField, FemSolver};
use crate::geometry::{generate_mesh, ExtensionField, Mesh, MeshOptions, OuterDomain, PerturbationField, Polygon, Vec2};
use crate::shape::{GradientRecovery, InterfaceQuadrature, InterfaceTraces};
use crate::verify::{default_radii, estimate_beta, CornerFit};

pub struct Model {
    omega: OuterDomain,
    poly: Polygon,
    contrast: Contrast,
    mesh: Arc<Mesh>,
    solver: FemSolver,
    spectrum: Option<CornerSpectrum>,
    recovery: GradientRecovery,
    quad: InterfaceQuadrature,
}

impl Model {
    /// Meshes the configuration (with a duplicated interface) and factorizes.
    pub fn new(poly: &Polygon, omega: &OuterDomain, contrast: Contrast, opts: &MeshOptions) -> Result<Self> {
        let mesh = generate_mesh(poly, omega, &opts.duplicated(true))?;
        Self::on_mesh(poly, omega, contrast, Arc::new(mesh))
    }

    pub fn on_mesh(poly: &Polygon, omega: &OuterDomain, contrast: Contrast, mesh: Arc<Mesh>) -> Result<Self> {
        let spectrum = match contrast {
            Contrast::Unity => None,
            c => Some(CornerSpectrum::new(poly, c)?),
        };
        let solver = FemSolver::new(&mesh, contrast)?;
        let recovery = GradientRecovery::new(&mesh, spectrum.as_ref());
        let quad = InterfaceQuadrature::new(poly, &recovery, contrast);
        Ok(Model { omega: omega.clone(), poly: poly.clone(), contrast, mesh, solver, spectrum, recovery, quad })
    }

    pub fn omega(&self) -> &OuterDomain {
        &self.omega
    }

    pub fn polygon(&self) -> &Polygon {
        &self.poly
    }

    pub fn contrast(&self) -> Contrast {
        self.contrast
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn solver(&self) -> &FemSolver {
        &self.solver
    }

    pub fn spectrum(&self) -> Option<&CornerSpectrum> {
        self.spectrum.as_ref()
    }

    pub fn recovery(&self) -> &GradientRecovery {
        &self.recovery
    }

    pub fn quadrature(&self) -> &InterfaceQuadrature {
        &self.quad
    }

    pub fn fourier(&self, m: usize, sine: bool) -> BoundaryFunction {
        BoundaryFunction::fourier(&self.mesh, &self.omega, m, sine)
    }

    /// Cosine and sine currents for `m = 1..=modes`.
    pub fn test_currents(&self, modes: usize) -> Vec<BoundaryFunction> {
        BoundaryFunction::fourier_family(&self.mesh, &self.omega, modes)
    }

    pub fn forward(&self, f: &BoundaryFunction) -> Result<FemField> {
        self.solver.solve_forward(f)
    }

    pub fn trace(&self, u: &FemField) -> BoundaryFunction {
        boundary_trace(&self.mesh, &self.omega, u)
    }

    /// Nodal values of the standard extension of `h`.
    pub fn extension_nodes(&self, h: &PerturbationField) -> Result<Vec<Vec2>> {
        if h.len() != self.poly.len() {
            return Err(Error::MeshMismatch);
        }
        if h.is_zero() {
            return Ok(vec![Vec2::ZERO; self.mesh.n_nodes()]);
        }
        let ext = ExtensionField::new(h, &self.poly, &self.omega)?;
        Ok(nodal_extension(&self.mesh, &ext))
    }

    pub fn material(&self, u: &FemField, h: &PerturbationField) -> Result<FemField> {
        self.solver.solve_material(u, &self.extension_nodes(h)?)
    }

    /// Corner fits at every vertex with the default radii.
    pub fn corner_fits(&self, u: &FemField) -> Result<Vec<CornerFit>> {
        let Some(spec) = &self.spectrum else {
            return Ok(Vec::new());
        };
        (0..spec.len())
            .map(|i| estimate_beta(&self.mesh, self.recovery.locator(), u, spec, i, &default_radii(spec.vertex(i).radius)))
            .collect()
    }

    /// Leading coefficients used for the corner-term subtraction.
    pub fn betas(&self, u: &FemField) -> Result<Vec<f64>> {
        Ok(self.corner_fits(u)?.iter().map(|f| f.beta_linear).collect())
    }

    /// Recovered one-sided gradients of `u` on the interface quadrature.
    pub fn traces(&self, u: &FemField) -> Result<InterfaceTraces> {
        let betas = self.betas(u)?;
        Ok(self.quad.traces(u, &betas))
    }
}
