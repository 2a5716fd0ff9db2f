//! Shape derivative of the boundary measurement: the boundary pairing
//! formula, the material-derivative route, the domain derivative, Taylor
//! remainders and operator-norm scans.

mod recovery;

pub use recovery::{GradientRecovery, Stencil};

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::corner::Contrast;
use crate::error::{Error, Result};
use crate::fem::{boundary_trace, shape_gradients, BoundaryFunction, FemField, FemSolver};
use crate::geometry::{deform, MeshOptions, PerturbationField, Polygon, Region, Vec2};
use crate::model::Model;
use crate::quadrature::{composite, graded_breakpoints};
use crate::verify::log_slope;

/// Quadrature node on the polygon boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePoint {
    pub edge: usize,
    /// Edge parameter in `(0, 1)`.
    pub s: f64,
    pub x: Vec2,
    pub weight: f64,
}

/// Layout of the interface rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceRule {
    /// Geometric panels per half edge.
    pub panels: usize,
    pub ratio: f64,
    /// Innermost panel end as a fraction of the edge length.
    pub cutoff: f64,
    /// Gauss points per piece; pieces are panels split at mesh nodes.
    pub points: usize,
    /// Within this distance of a vertex the remainder gradient is frozen at
    /// its value at that distance.
    pub freeze: f64,
}

impl Default for InterfaceRule {
    fn default() -> Self {
        InterfaceRule { panels: 40, ratio: 0.5, cutoff: 1e-12, points: 4, freeze: 0.0 }
    }
}

/// Graded composite Gauss rule on every polygon edge with cached recovery
/// stencils on each available side.
#[derive(Debug, Clone)]
pub struct InterfaceQuadrature {
    points: Vec<InterfacePoint>,
    tangents: Vec<Vec2>,
    normals: Vec<Vec2>,
    edge_lengths: Vec<f64>,
    inside: Vec<Stencil>,
    outside: Vec<Stencil>,
    freeze: f64,
}

/// Recovery stencil at parameter `s` of polygon edge `edge`, frozen within
/// `freeze` of either end.
pub fn edge_stencil(poly: &Polygon, recovery: &GradientRecovery, edge: usize, s: f64, region: Region, freeze: f64) -> Stencil {
    let (a, b) = poly.edge(edge);
    let len = poly.edge_length(edge);
    if s.min(1.0 - s) * len >= freeze {
        return recovery.stencil(a.lerp(b, s), region);
    }
    let (i, anchor) = if s < 0.5 { (edge, a.lerp(b, freeze / len)) } else { ((edge + 1) % poly.len(), b.lerp(a, freeze / len)) };
    recovery.frozen_stencil(a.lerp(b, s), anchor, i, region)
}

impl InterfaceQuadrature {
    pub fn new(poly: &Polygon, recovery: &GradientRecovery, contrast: Contrast) -> Self {
        let freeze = if recovery.spectrum().is_some() { 0.4 * recovery.mesh().hmax() } else { 0.0 };
        Self::with_rule(poly, recovery, contrast, &InterfaceRule { freeze, ..InterfaceRule::default() })
    }

    pub fn with_rule(poly: &Polygon, recovery: &GradientRecovery, contrast: Contrast, rule: &InterfaceRule) -> Self {
        let InterfaceRule { panels, ratio, cutoff, points, freeze } = *rule;
        let mesh = recovery.mesh();
        let mut pts = Vec::new();
        for j in 0..poly.len() {
            let (a, b) = poly.edge(j);
            let len = poly.edge_length(j);
            // panel ends plus mesh nodes, so no panel straddles a kink of the
            // recovered gradient
            let mut breaks = graded_breakpoints(len, panels, ratio, cutoff);
            for e in mesh.interface().iter().filter(|e| e.edge == j) {
                breaks.push(e.s0 * len);
                breaks.push(e.s1 * len);
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * len);
            for (x, w) in composite(&breaks, points) {
                let s = x / len;
                pts.push(InterfacePoint { edge: j, s, x: a.lerp(b, s), weight: w });
            }
        }
        let stencil = |p: &InterfacePoint, region: Region| edge_stencil(poly, recovery, p.edge, p.s, region, freeze);
        let inside = if contrast.k().is_some() { pts.iter().map(|p| stencil(p, Region::Inside)).collect() } else { Vec::new() };
        let outside = pts.iter().map(|p| stencil(p, Region::Outside)).collect();
        InterfaceQuadrature {
            points: pts,
            tangents: (0..poly.len()).map(|j| poly.tangent(j)).collect(),
            normals: (0..poly.len()).map(|j| poly.normal(j)).collect(),
            edge_lengths: (0..poly.len()).map(|j| poly.edge_length(j)).collect(),
            inside,
            outside,
            freeze,
        }
    }

    /// Radius within which stencils are frozen.
    pub fn freeze(&self) -> f64 {
        self.freeze
    }

    pub fn points(&self) -> &[InterfacePoint] {
        &self.points
    }

    pub fn tangent(&self, q: usize) -> Vec2 {
        self.tangents[self.points[q].edge]
    }

    pub fn normal(&self, q: usize) -> Vec2 {
        self.normals[self.points[q].edge]
    }

    /// Sum of weights on edge `j`.
    pub fn edge_weight_sum(&self, j: usize) -> f64 {
        self.points.iter().filter(|p| p.edge == j).map(|p| p.weight).sum()
    }

    pub fn edge_length(&self, j: usize) -> f64 {
        self.edge_lengths[j]
    }

    /// Distance from point `q` to the nearer end of its edge.
    pub fn vertex_distance(&self, q: usize) -> f64 {
        let p = self.points[q];
        p.s.min(1.0 - p.s) * self.edge_lengths[p.edge]
    }

    /// `h . nu` at every point.
    pub fn normal_components(&self, poly: &Polygon, h: &PerturbationField) -> Vec<f64> {
        self.points.iter().map(|p| h.normal_component(poly, p.edge, p.s)).collect()
    }

    pub fn traces(&self, u: &FemField, betas: &[f64]) -> InterfaceTraces {
        InterfaceTraces {
            grad_in: self.inside.iter().map(|s| s.apply(u, betas)).collect(),
            grad_out: self.outside.iter().map(|s| s.apply(u, betas)).collect(),
        }
    }
}

/// One-sided recovered gradients at the interface quadrature points. `grad_in`
/// is empty for degenerate contrasts.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTraces {
    pub grad_in: Vec<Vec2>,
    pub grad_out: Vec<Vec2>,
}

impl InterfaceTraces {
    pub fn add_scaled(&self, a: f64, other: &Self) -> Self {
        let f = |x: &[Vec2], y: &[Vec2]| x.iter().zip(y).map(|(p, q)| *p + *q * a).collect();
        InterfaceTraces { grad_in: f(&self.grad_in, &other.grad_in), grad_out: f(&self.grad_out, &other.grad_out) }
    }
}

/// Symmetric matrix with eigenvalue 1 along `tau` and `k` along `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyMatrix {
    pub m: [[f64; 2]; 2],
}

impl AnisotropyMatrix {
    pub fn new(tau: Vec2, k: f64) -> Self {
        let nu = Vec2::new(tau.y, -tau.x);
        AnisotropyMatrix {
            m: [
                [tau.x * tau.x + k * nu.x * nu.x, tau.x * tau.y + k * nu.x * nu.y],
                [tau.y * tau.x + k * nu.y * nu.x, tau.y * tau.y + k * nu.y * nu.y],
            ],
        }
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.m[0][0] * v.x + self.m[0][1] * v.y, self.m[1][0] * v.x + self.m[1][1] * v.y)
    }
}

/// Integrand of the boundary pairing at point `q`, without the `h . nu`
/// factor.
fn pairing_density(contrast: Contrast, quad: &InterfaceQuadrature, tu: &InterfaceTraces, tv: &InterfaceTraces, q: usize) -> f64 {
    let (tau, nu) = (quad.tangent(q), quad.normal(q));
    match contrast {
        Contrast::Finite(_) | Contrast::Unity => {
            let k = contrast.k().unwrap();
            let m = AnisotropyMatrix::new(tau, k);
            (1.0 - k) * tu.grad_in[q].dot(m.apply(tv.grad_in[q]))
        }
        Contrast::Insulating => tu.grad_out[q].dot(tau) * tv.grad_out[q].dot(tau),
        Contrast::Conducting => -tu.grad_out[q].dot(nu) * tv.grad_out[q].dot(nu),
    }
}

/// `<d Lambda_f h, g>` by the boundary pairing formula, from the interface
/// traces of the forward solutions for `f` and `g`.
pub fn shape_derivative_pairing(model: &Model, h: &PerturbationField, tu: &InterfaceTraces, tv: &InterfaceTraces) -> Result<f64> {
    if h.len() != model.polygon().len() {
        return Err(Error::MeshMismatch);
    }
    let quad = model.quadrature();
    let hn = quad.normal_components(model.polygon(), h);
    Ok((0..quad.points().len())
        .filter(|&q| hn[q] != 0.0)
        .map(|q| quad.points()[q].weight * hn[q] * pairing_density(model.contrast(), quad, tu, tv, q))
        .sum())
}

/// Forward solutions and interface traces for a family of test currents,
/// with the factorized Gram matrix of the family.
pub struct PairingBasis {
    pub currents: Vec<BoundaryFunction>,
    pub fields: Vec<FemField>,
    pub traces: Vec<InterfaceTraces>,
    gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl PairingBasis {
    /// The `2 * modes` Fourier currents.
    pub fn new(model: &Model, modes: usize) -> Result<Self> {
        Self::from_currents(model, model.test_currents(modes))
    }

    pub fn from_currents(model: &Model, currents: Vec<BoundaryFunction>) -> Result<Self> {
        let fields = model.solver().solve_forward_many(&currents)?;
        let traces = fields.iter().map(|v| model.traces(v)).collect::<Result<Vec<_>>>()?;
        let n = currents.len();
        let g = DMatrix::from_fn(n, n, |a, b| currents[a].inner(&currents[b]));
        let gram = g.cholesky().ok_or_else(|| Error::SolverDivergence("test currents are dependent".into()))?;
        Ok(PairingBasis { currents, fields, traces, gram })
    }

    pub fn len(&self) -> usize {
        self.currents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.currents.is_empty()
    }

    /// Galerkin reconstruction of a boundary function from its pairings.
    pub fn reconstruct(&self, pairings: &[f64]) -> BoundaryFunction {
        let c = self.gram.solve(&DVector::from_column_slice(pairings));
        let mut out = self.currents[0].scaled(0.0);
        for (a, g) in c.iter().zip(&self.currents) {
            out = out.add_scaled(*a, g);
        }
        out
    }

    /// Coefficients of the `L^2` projection of `b` onto the family.
    pub fn coefficients(&self, b: &BoundaryFunction) -> Vec<f64> {
        let p: Vec<f64> = self.currents.iter().map(|g| b.inner(g)).collect();
        self.gram.solve(&DVector::from_vec(p)).iter().copied().collect()
    }

    /// `L^2` projection of `b` onto the family.
    pub fn project(&self, b: &BoundaryFunction) -> BoundaryFunction {
        let p: Vec<f64> = self.currents.iter().map(|g| b.inner(g)).collect();
        self.reconstruct(&p)
    }
}

/// Pairings of `d Lambda_f h` against every current in the basis.
pub fn pairings(model: &Model, h: &PerturbationField, tu: &InterfaceTraces, basis: &PairingBasis) -> Result<Vec<f64>> {
    basis.traces.iter().map(|tv| shape_derivative_pairing(model, h, tu, tv)).collect()
}

/// `d Lambda_f h` reconstructed from its pairings against the basis.
pub fn shape_derivative_boundary(model: &Model, h: &PerturbationField, tu: &InterfaceTraces, basis: &PairingBasis) -> Result<BoundaryFunction> {
    if h.is_zero() {
        return Ok(basis.currents[0].scaled(0.0));
    }
    Ok(basis.reconstruct(&pairings(model, h, tu, basis)?))
}

/// Boundary trace of the material derivative.
pub fn material_trace(model: &Model, u: &FemField, h: &PerturbationField) -> Result<BoundaryFunction> {
    Ok(model.trace(&model.material(u, h)?))
}

/// Area-weighted average of element gradients at every node (copies on a
/// duplicated interface only see their own side).
pub fn nodal_gradients(solver: &FemSolver, u: &FemField) -> Vec<Vec2> {
    let mesh = solver.mesh();
    let mut g = vec![Vec2::ZERO; mesh.n_nodes()];
    let mut w = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if solver.sigma(t) == 0.0 && solver.contrast() != Contrast::Unity {
            continue;
        }
        let sg = shape_gradients(mesh, t);
        let gt = (0..3).fold(Vec2::ZERO, |acc, i| acc + sg[i] * u.value(tri[i]));
        let a = mesh.area(t);
        for &v in tri {
            g[v] += gt * a;
            w[v] += a;
        }
    }
    g.iter().zip(&w).map(|(x, &a)| if a > 0.0 { *x * (1.0 / a) } else { Vec2::ZERO }).collect()
}

/// Domain derivative `u' = u_dot - H . grad u` at the nodes of the duplicated
/// mesh.
pub fn domain_derivative(solver: &FemSolver, udot: &FemField, u: &FemField, h_nodes: &[Vec2]) -> Result<FemField> {
    let mesh = solver.mesh();
    if !mesh.is_duplicated() {
        return Err(Error::RequiresDuplicatedMesh);
    }
    let g = nodal_gradients(solver, u);
    let vals = (0..mesh.n_nodes())
        .map(|k| if h_nodes[k] == Vec2::ZERO { udot.value(k) } else { udot.value(k) - h_nodes[k].dot(g[k]) })
        .collect();
    Ok(FemField::new(vals))
}

/// One row of a Taylor study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow {
    pub t: f64,
    pub remainder: f64,
    /// Slope against the previous row.
    pub slope_running: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorStudy {
    pub rows: Vec<TaylorRow>,
    /// Least-squares log-log slope over the rows with `t > 0`.
    pub slope: f64,
    /// `||d Lambda_f h||`.
    pub derivative_norm: f64,
}

impl TaylorStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,remainder,slope_running\n");
        for r in &self.rows {
            let sr = r.slope_running.map_or(String::new(), |x| format!("{x:.6}"));
            let _ = writeln!(s, "{:.6e},{:.12e},{}", r.t, r.remainder, sr);
        }
        s
    }
}

/// Measurement on the mesh transported by `t H`.
pub fn perturbed_trace(model: &Model, f: &BoundaryFunction, h: &PerturbationField, h_nodes: &[Vec2], t: f64) -> Result<BoundaryFunction> {
    deform(model.polygon(), h, t, model.omega())?;
    let disp: Vec<Vec2> = h_nodes.iter().map(|v| *v * t).collect();
    let mesh = Arc::new(model.mesh().transported(&disp)?);
    let solver = FemSolver::new(&mesh, model.contrast())?;
    let u = solver.solve_forward(f)?;
    Ok(boundary_trace(&mesh, model.omega(), &u))
}

/// `||Lambda_f(D_th) - Lambda_f(D) - t d Lambda_f(D) h||` for each `t`. The
/// perturbed configurations reuse the mesh topology, moved by `t H`.
pub fn taylor_remainder(model: &Model, f: &BoundaryFunction, h: &PerturbationField, t_list: &[f64]) -> Result<TaylorStudy> {
    let u = model.forward(f)?;
    let base = model.trace(&u);
    let h_nodes = model.extension_nodes(h)?;
    let d = model.trace(&model.solver().solve_material(&u, &h_nodes)?);
    let mut rows: Vec<TaylorRow> = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let remainder = if t == 0.0 {
            0.0
        } else {
            perturbed_trace(model, f, h, &h_nodes, t)?.sub(&base).add_scaled(-t, &d).norm()
        };
        let slope_running = rows.last().filter(|p| p.t > 0.0 && t > 0.0 && p.remainder > 0.0 && remainder > 0.0).map(|p| {
            (remainder / p.remainder).ln() / (t / p.t).ln()
        });
        rows.push(TaylorRow { t, remainder, slope_running });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.t > 0.0 && r.remainder > 0.0).map(|r| (r.t.ln(), r.remainder.ln())).collect();
    let slope = if pts.len() >= 2 { log_slope(&pts) } else { f64::NAN };
    Ok(TaylorStudy { rows, slope, derivative_norm: d.norm() })
}

/// Operator-norm proxy at each polygon: the largest `||d Lambda_f h||` over
/// the basis fields scaled to unit `W^{1,inf}` norm.
pub fn derivative_norm_scan(
    polygons: &[Polygon],
    omega: &crate::geometry::OuterDomain,
    contrast: Contrast,
    current: (usize, bool),
    basis: &dyn Fn(&Polygon) -> Vec<PerturbationField>,
    opts: &MeshOptions,
) -> Result<Vec<f64>> {
    polygons
        .iter()
        .map(|poly| {
            let model = Model::new(poly, omega, contrast, opts)?;
            let u = model.forward(&model.fourier(current.0, current.1))?;
            let mut best = 0.0f64;
            for h in basis(poly) {
                let n = h.w1inf_norm(poly);
                if n == 0.0 {
                    continue;
                }
                best = best.max(material_trace(&model, &u, &h.scaled(1.0 / n))?.norm());
            }
            Ok(best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{square, OuterDomain};

    fn model(k: Contrast, hmax: f64) -> Model {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        Model::new(&poly, &o, k, &MeshOptions::new(hmax)).unwrap()
    }

    #[test]
    fn quadrature_weights_cover_edges() {
        let m = model(Contrast::Finite(2.0), 0.1);
        let q = m.quadrature();
        for j in 0..4 {
            assert!((q.edge_weight_sum(j) - q.edge_length(j)).abs() < 1e-12);
        }
        assert!(q.points().iter().all(|p| p.weight > 0.0 && p.s > 0.0 && p.s < 1.0));
    }

    #[test]
    fn anisotropy_eigenpairs() {
        let tau = Vec2::new(0.6, 0.8);
        let nu = Vec2::new(tau.y, -tau.x);
        let m = AnisotropyMatrix::new(tau, 3.5);
        assert!((m.apply(tau) - tau).norm() < 1e-12);
        assert!((m.apply(nu) - nu * 3.5).norm() < 1e-12);
    }

    #[test]
    fn linear_field_traces_in_homogeneous_medium() {
        let m = model(Contrast::Unity, 0.05);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let t = m.traces(&u).unwrap();
        // u ~ x up to O(h^2); the recovered gradient is (1, 0) up to O(h)
        let err = t.grad_in.iter().chain(&t.grad_out).map(|g| (*g - Vec2::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
        let h = PerturbationField::vertex_motion(4, 0, Vec2::new(1.0, 0.0));
        assert_eq!(shape_derivative_pairing(&m, &h, &t, &t).unwrap(), 0.0);
    }

    #[test]
    fn tangential_slide_has_no_pairing() {
        let m = model(Contrast::Finite(2.0), 0.08);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let t = m.traces(&u).unwrap();
        // both endpoints of edge 0 moved along the edge: h . nu = 0 there
        let tau = m.polygon().tangent(0);
        let mut vals = vec![Vec2::ZERO; 4];
        vals[0] = tau;
        vals[1] = tau;
        let h = PerturbationField::from_vertex_values(vals);
        let hn = m.quadrature().normal_components(m.polygon(), &h);
        let on_edge0: f64 = m.quadrature().points().iter().zip(&hn).filter(|(p, _)| p.edge == 0).map(|(_, x)| x.abs()).sum();
        assert!(on_edge0 < 1e-14);
        let p = shape_derivative_pairing(&m, &h, &t, &t).unwrap();
        assert!(p.is_finite());
    }

    #[test]
    fn pairing_is_bilinear() {
        let m = model(Contrast::Finite(2.0), 0.08);
        let basis = PairingBasis::new(&m, 2).unwrap();
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let tu = m.traces(&u).unwrap();
        let h1 = PerturbationField::vertex_motion(4, 0, Vec2::new(1.0, 0.5));
        let h2 = PerturbationField::dilation(m.polygon());
        let a = pairings(&m, &h1.combine(2.0, &h2, -0.5), &tu, &basis).unwrap();
        let b1 = pairings(&m, &h1, &tu, &basis).unwrap();
        let b2 = pairings(&m, &h2, &tu, &basis).unwrap();
        for j in 0..a.len() {
            assert!((a[j] - 2.0 * b1[j] + 0.5 * b2[j]).abs() < 1e-10 * (b1[j].abs() + b2[j].abs() + 1e-12));
        }
        // linear in g through the linear corner coefficients
        let g = basis.currents[0].add_scaled(3.0, &basis.currents[3]);
        let vg = m.forward(&g).unwrap();
        let tg = m.traces(&vg).unwrap();
        let direct = shape_derivative_pairing(&m, &h1, &tu, &tg).unwrap();
        let combo = b1[0] + 3.0 * b1[3];
        assert!((direct - combo).abs() < 1e-9 * combo.abs(), "{direct} {combo}");
        assert_eq!(shape_derivative_boundary(&m, &PerturbationField::zero(4), &tu, &basis).unwrap().norm(), 0.0);
    }

    #[test]
    fn zero_perturbation_zero_remainder() {
        let m = model(Contrast::Finite(2.0), 0.1);
        let f = m.fourier(1, false);
        let s = taylor_remainder(&m, &f, &PerturbationField::zero(4), &[0.0, 0.01]).unwrap();
        assert_eq!(s.rows[0].remainder, 0.0);
        assert!(s.rows[1].remainder < 1e-12);
    }

    #[test]
    fn domain_derivative_off_support_equals_material() {
        let m = model(Contrast::Finite(2.0), 0.08);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let h = PerturbationField::vertex_motion(4, 1, Vec2::new(0.0, 1.0));
        let hn = m.extension_nodes(&h).unwrap();
        let ud = m.solver().solve_material(&u, &hn).unwrap();
        let up = domain_derivative(m.solver(), &ud, &u, &hn).unwrap();
        for k in 0..m.mesh().n_nodes() {
            if hn[k] == Vec2::ZERO {
                assert_eq!(up.value(k), ud.value(k));
            }
        }
    }
}
