//! Domain derivative as the solution of the transmission problem with jump
//! data. The solution is split into one singular function per vertex, whose
//! jumps carry the `r^(gamma_1 - 1)` part of the data, and a regular part
//! solved on the duplicated mesh.

use std::fmt::Write as _;

use crate::corner::{singular_coefficients, Contrast, SingularFunction};
use crate::error::{Error, Result};
use crate::fem::{shape_gradients, BoundaryFunction, FemField};
use crate::geometry::{InterfaceEdge, Mesh, PerturbationField, Region, Vec2};
use crate::model::Model;
use crate::quadrature::{gauss_legendre, graded_one_sided, push_mapped};
use crate::shape::{edge_stencil, shape_derivative_pairing, InterfaceTraces};

/// Data of the regular-part problem.
#[derive(Debug, Clone)]
pub struct TransmissionSources {
    pub singular: Vec<SingularFunction>,
    /// Prescribed jump of the regular part, stored on the outside copies of
    /// interface nodes (zero elsewhere). Zero at polygon vertices.
    pub phi: Vec<f64>,
    /// `(1 - k) int (h . nu) d_tau u d_tau v` per node.
    pub interface_load: Vec<f64>,
    /// `-sum_i a(w_i, v)` per node; carries both the volume sources and the
    /// flux jumps of the singular functions.
    pub singular_load: Vec<f64>,
}

impl TransmissionSources {
    pub fn load(&self) -> Vec<f64> {
        self.interface_load.iter().zip(&self.singular_load).map(|(a, b)| a + b).collect()
    }

    /// `int sigma Laplacian(w_i)` per vertex.
    pub fn source_integrals(&self) -> Vec<f64> {
        self.singular.iter().map(|s| s.source_integral()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.phi.iter().chain(&self.interface_load).chain(&self.singular_load).all(|&x| x == 0.0)
    }
}

/// Interface edges of the mesh grouped by polygon edge, sorted along it.
fn edges_by_side(mesh: &Mesh, n: usize) -> Vec<Vec<InterfaceEdge>> {
    let mut out = vec![Vec::new(); n];
    for e in mesh.interface() {
        out[e.edge].push(*e);
    }
    for list in &mut out {
        list.sort_by(|a, b| a.s0.total_cmp(&b.s0));
    }
    out
}

/// Sources for the perturbation `h`, given the forward solution `u` and its
/// leading corner coefficients.
pub fn assemble_sources(model: &Model, u: &FemField, h: &PerturbationField, betas: &[f64]) -> Result<TransmissionSources> {
    let poly = model.polygon();
    let mesh = model.mesh();
    let n = poly.len();
    if h.len() != n || u.values().len() != mesh.n_nodes() {
        return Err(Error::MeshMismatch);
    }
    if !mesh.is_duplicated() {
        return Err(Error::RequiresDuplicatedMesh);
    }
    let zero = vec![0.0; mesh.n_nodes()];
    let k = match model.contrast() {
        Contrast::Finite(k) => k,
        Contrast::Unity => {
            return Ok(TransmissionSources { singular: Vec::new(), phi: zero.clone(), interface_load: zero.clone(), singular_load: zero })
        }
        c => return Err(Error::UnsupportedContrast(c.label())),
    };
    if betas.len() < n {
        return Err(Error::MissingBeta(betas.len()));
    }
    let spectrum = model.spectrum().expect("finite contrast has a spectrum");
    let singular = (0..n)
        .map(|i| {
            let (hm, hp) = h.normal_limits(poly, i);
            singular_coefficients(i, spectrum, betas[i], hm, hp, model.contrast())
        })
        .collect::<Result<Vec<_>>>()?;

    let sides = edges_by_side(mesh, n);
    let quad = model.quadrature();
    let hn = quad.normal_components(poly, h);
    let tu = quad.traces(u, betas);

    let mut interface_load = zero.clone();
    for (q, p) in quad.points().iter().enumerate() {
        if hn[q] == 0.0 {
            continue;
        }
        let list = &sides[p.edge];
        let idx = list.partition_point(|e| e.s1 < p.s).min(list.len() - 1);
        let e = list[idx];
        let dphi = 1.0 / ((e.s1 - e.s0) * quad.edge_length(p.edge));
        let c = (1.0 - k) * p.weight * hn[q] * tu.grad_in[q].dot(quad.tangent(q));
        interface_load[e.a] -= c * dphi;
        interface_load[e.b] += c * dphi;
    }

    let mut phi = zero.clone();
    let mut done = vec![false; mesh.n_nodes()];
    for (j, list) in sides.iter().enumerate() {
        let len = poly.edge_length(j);
        let nu = poly.normal(j);
        for e in list {
            for (s, node) in [(e.s0, e.a_out), (e.s1, e.b_out)] {
                if done[node] {
                    continue;
                }
                done[node] = true;
                if s <= 1e-12 || s >= 1.0 - 1e-12 {
                    continue;
                }
                let dnu = edge_stencil(poly, model.recovery(), j, s, Region::Inside, quad.freeze()).apply(u, betas).dot(nu);
                let sing = singular[j].jump(s * len, 0) + singular[(j + 1) % n].jump((1.0 - s) * len, 1);
                phi[node] = (1.0 - k) * h.normal_component(poly, j, s) * dnu - sing;
            }
        }
    }

    let singular_load = singular_stiffness_load(model, &singular);
    Ok(TransmissionSources { singular, phi, interface_load, singular_load })
}

/// `-sum_i a(w_i, phi_k)` for every node `k`. On each triangle
/// `int grad w . grad phi_k = grad phi_k . oint w n ds`; edges ending at a
/// vertex get a rule graded towards it.
fn singular_stiffness_load(model: &Model, singular: &[SingularFunction]) -> Vec<f64> {
    let mesh = model.mesh();
    let mut load = vec![0.0; mesh.n_nodes()];
    let mut plain = Vec::with_capacity(6);
    push_mapped(&gauss_legendre(6), 0.0, 1.0, &mut plain);
    let graded = graded_one_sided(1.0, 40, 0.5, 4);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let sigma = model.solver().sigma(t);
        let region = mesh.regions()[t];
        let pts = tri.map(|v| mesh.node(v));
        let diam = (0..3).map(|e| pts[e].dist(pts[(e + 1) % 3])).fold(0.0, f64::max);
        let mut grads: Option<[Vec2; 3]> = None;
        for sf in singular.iter().filter(|s| !s.is_zero()) {
            let c = sf.spectrum.position;
            if pts.iter().all(|p| p.dist(c) > sf.radius() + diam) {
                continue;
            }
            let mut flux = Vec2::ZERO;
            for e in 0..3 {
                let (a, b, other) = (pts[e], pts[(e + 1) % 3], pts[(e + 2) % 3]);
                let d = b - a;
                let len = d.norm();
                let mut normal = Vec2::new(d.y, -d.x) * (1.0 / len);
                if normal.dot(other - a) > 0.0 {
                    normal = normal * -1.0;
                }
                let integral: f64 = if a.dist(c) < 1e-14 * len.max(1.0) {
                    graded.iter().map(|&(x, w)| w * len * sf.eval(a.lerp(b, x), region).0).sum()
                } else if b.dist(c) < 1e-14 * len.max(1.0) {
                    graded.iter().map(|&(x, w)| w * len * sf.eval(b.lerp(a, x), region).0).sum()
                } else {
                    plain.iter().map(|&(x, w)| w * len * sf.eval(a.lerp(b, x), region).0).sum()
                };
                flux += normal * integral;
            }
            let g = *grads.get_or_insert_with(|| shape_gradients(mesh, t));
            for i in 0..3 {
                load[tri[i]] -= sigma * g[i].dot(flux);
            }
        }
    }
    load
}

/// Regular part, singular parts and the boundary trace of their sum.
#[derive(Debug, Clone)]
pub struct SplitSolution {
    pub regular: FemField,
    pub singular: Vec<SingularFunction>,
    pub trace: BoundaryFunction,
}

impl SplitSolution {
    /// Composed value `w_0 + sum_i w_i` at `p` on the side `region`.
    pub fn value_at(&self, model: &Model, p: Vec2, region: Region) -> Option<f64> {
        let mesh = model.mesh();
        let w0 = self.regular.interpolate(mesh, model.recovery().locator(), p, Some(region))?;
        Some(w0 + self.singular.iter().map(|s| s.eval(p, region).0).sum::<f64>())
    }
}

/// Solves for the regular part. The singular functions vanish near the
/// outer boundary, so the trace is that of the regular part.
pub fn solve_transmission(model: &Model, sources: &TransmissionSources) -> Result<SplitSolution> {
    let regular = model.solver().solve_load(&sources.load(), Some(&sources.phi))?;
    let trace = model.trace(&regular);
    Ok(SplitSolution { regular, singular: sources.singular.clone(), trace })
}

/// Trace of the domain derivative by the transmission route, with corner
/// coefficients fitted from `u`.
pub fn transmission_trace(model: &Model, u: &FemField, h: &PerturbationField) -> Result<BoundaryFunction> {
    let betas = match model.contrast() {
        Contrast::Unity => vec![0.0; model.polygon().len()],
        _ => model.betas(u)?,
    };
    let sources = assemble_sources(model, u, h, &betas)?;
    Ok(solve_transmission(model, &sources)?.trace)
}

/// Both sides of `<w, g> = (1 - k) oint (h . nu) grad u . M grad v_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceIdentity {
    pub trace_side: f64,
    pub pairing_side: f64,
}

impl TraceIdentity {
    pub fn relative_residual(&self) -> f64 {
        let d = (self.trace_side - self.pairing_side).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.pairing_side.abs().max(self.trace_side.abs())
        }
    }
}

pub fn verify_trace_identity(
    model: &Model,
    w: &SplitSolution,
    h: &PerturbationField,
    tu: &InterfaceTraces,
    g: &BoundaryFunction,
    tv: &InterfaceTraces,
) -> Result<TraceIdentity> {
    Ok(TraceIdentity { trace_side: w.trace.inner(g), pairing_side: shape_derivative_pairing(model, h, tu, tv)? })
}

/// Integrability residual `sum_i int F_i - int_{dD \\ B_delta} psi` at one
/// excision radius, split into the edge-end terms of the interface data and
/// the singular terms (volume sources plus excised flux jumps of `w_i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityRow {
    /// Excision radius as a fraction of the vertex radius.
    pub delta: f64,
    pub edge_term: f64,
    pub singular_term: f64,
}

impl CompatibilityRow {
    pub fn residual(&self) -> f64 {
        self.edge_term + self.singular_term
    }

    /// Size of the two parts; the residual is judged against this.
    pub fn scale(&self) -> f64 {
        self.edge_term.abs() + self.singular_term.abs()
    }
}

pub fn check_compatibility(
    model: &Model,
    u: &FemField,
    h: &PerturbationField,
    sources: &TransmissionSources,
    betas: &[f64],
    fractions: &[f64],
) -> Result<Vec<CompatibilityRow>> {
    let poly = model.polygon();
    let n = poly.len();
    let Some(k) = model.contrast().k() else {
        return Err(Error::UnsupportedContrast(model.contrast().label()));
    };
    if sources.singular.is_empty() {
        return Ok(fractions.iter().map(|&d| CompatibilityRow { delta: d, edge_term: 0.0, singular_term: 0.0 }).collect());
    }
    let freeze = model.quadrature().freeze();
    // (h . nu) d_tau u at parameter s of edge j
    let f = |j: usize, s: f64| {
        let g = edge_stencil(poly, model.recovery(), j, s, Region::Inside, freeze).apply(u, betas);
        h.normal_component(poly, j, s) * g.dot(poly.tangent(j))
    };
    let rule = gauss_legendre(8);
    let mut rows = Vec::with_capacity(fractions.len());
    for &frac in fractions {
        let (mut et, mut st) = (0.0, 0.0);
        for (i, sf) in sources.singular.iter().enumerate() {
            let big = sf.radius();
            let delta = frac * big;
            let prev = (i + n - 1) % n;
            let minus = f(prev, 1.0 - delta / poly.edge_length(prev));
            let plus = f(i, delta / poly.edge_length(i));
            et -= (1.0 - k) * (minus - plus);
            let mut bp = vec![delta];
            while bp[bp.len() - 1] * 2.0 < big {
                let last = bp[bp.len() - 1];
                bp.push(2.0 * last);
            }
            bp.push(big);
            let mut nodes = Vec::new();
            for w in bp.windows(2) {
                push_mapped(&rule, w[0], w[1], &mut nodes);
            }
            let excised: f64 = nodes.iter().map(|&(r, w)| w * (sf.flux_jump(r, 0) + sf.flux_jump(r, 1))).sum();
            st += sf.source_integral() + excised;
        }
        rows.push(CompatibilityRow { delta: frac, edge_term: et, singular_term: st });
    }
    Ok(rows)
}

/// Leading-order boundary terms at the excised disks in the pairing of `w`
/// with `v_g`: the edge-end values of `(h . nu) d_tau u` weighted by
/// `(k - 1) v_g(x_i)`, and the flux of `sigma v_g d_nu w_i` through
/// `dB_delta(x_i)`. Both grow like `delta^(gamma_1 - 1)`; their sum does not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRow {
    /// Excision radius as a fraction of the vertex radius.
    pub delta: f64,
    pub vertex_term: f64,
    pub singular_term: f64,
}

impl DeltaRow {
    pub fn sum(&self) -> f64 {
        self.vertex_term + self.singular_term
    }

    /// `|sum|` relative to the smaller of the two terms.
    pub fn cancellation(&self) -> f64 {
        let m = self.vertex_term.abs().min(self.singular_term.abs());
        if self.sum() == 0.0 {
            0.0
        } else {
            self.sum().abs() / m.max(1e-300)
        }
    }
}

/// `v_g` at each polygon vertex.
pub fn vertex_values(model: &Model, v: &FemField) -> Result<Vec<f64>> {
    let poly = model.polygon();
    (0..poly.len())
        .map(|i| {
            let p = poly.vertex(i);
            v.interpolate(model.mesh(), model.recovery().locator(), p, Some(Region::Inside))
                .or_else(|| v.interpolate(model.mesh(), model.recovery().locator(), p, None))
                .ok_or(Error::MeshMismatch)
        })
        .collect()
}

/// The two leading-order terms per excision fraction. The vertex terms use
/// the fitted `beta` carried by each singular function together with the
/// eigenfunction data `A^-, B^-`; the singular terms use the angular integral
/// of the singular profile.
pub fn delta_terms(singular: &[SingularFunction], vg: &[f64], fractions: &[f64]) -> Vec<DeltaRow> {
    fractions
        .iter()
        .map(|&frac| {
            let (mut vt, mut st) = (0.0, 0.0);
            for sf in singular.iter().filter(|s| !s.is_zero()) {
                let v = &sf.spectrum;
                let g = v.gamma[1];
                let (c, s) = v.cs1();
                let [am, bm, _, _] = v.y1;
                let d = (frac * sf.radius()).powf(g - 1.0);
                let x = vg[sf.vertex];
                vt -= (sf.k - 1.0) * sf.beta * g * x * (sf.h_minus * (am * c + bm * s) + sf.h_plus * am) * d;
                st -= (g - 1.0) * x * sf.profile().weighted_integral(sf.k) * d;
            }
            DeltaRow { delta: frac, vertex_term: vt, singular_term: st }
        })
        .collect()
}

pub fn delta_csv(rows: &[DeltaRow]) -> String {
    let mut s = String::from("delta,vertex_term,singular_term,sum\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.12e},{:.12e},{:.12e}", r.delta, r.vertex_term, r.singular_term, r.sum());
    }
    s
}

/// `arc_length,trace_transmission,trace_material,trace_pairing` on the nodes
/// of the first function.
pub fn trace_comparison_csv(transmission: &BoundaryFunction, material: &BoundaryFunction, pairing: &BoundaryFunction) -> String {
    let mut s = String::from("arc_length,trace_transmission,trace_material,trace_pairing\n");
    for (i, a) in transmission.arc_lengths().iter().enumerate() {
        let _ = writeln!(s, "{:.12e},{:.12e},{:.12e},{:.12e}", a, transmission.values()[i], material.values()[i], pairing.values()[i]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{square, MeshOptions, OuterDomain, Polygon};

    fn square_model(hmax: f64, k: f64) -> Model {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        Model::new(&poly, &o, Contrast::Finite(k), &MeshOptions::new(hmax)).unwrap()
    }

    fn outward(model: &Model, i: usize) -> PerturbationField {
        let p = model.polygon().vertex(i);
        PerturbationField::vertex_motion(model.polygon().len(), i, p * (1.0 / p.norm()))
    }

    #[test]
    fn zero_perturbation_gives_zero_solution() {
        let m = square_model(0.04, 2.0);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let betas = m.betas(&u).unwrap();
        let src = assemble_sources(&m, &u, &PerturbationField::zero(4), &betas).unwrap();
        assert!(src.is_zero());
        let w = solve_transmission(&m, &src).unwrap();
        assert!(w.trace.norm() < 1e-14);
        let rows = check_compatibility(&m, &u, &PerturbationField::zero(4), &src, &betas, &[0.2, 0.1]).unwrap();
        assert!(rows.iter().all(|r| r.residual() == 0.0));
    }

    #[test]
    fn unity_contrast_has_no_sources() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let m = Model::new(&poly, &o, Contrast::Unity, &MeshOptions::new(0.04)).unwrap();
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let src = assemble_sources(&m, &u, &PerturbationField::dilation(&poly), &[0.0; 4]).unwrap();
        assert!(src.is_zero());
    }

    #[test]
    fn solution_is_linear_in_h() {
        let m = square_model(0.03, 2.0);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let betas = m.betas(&u).unwrap();
        let h1 = outward(&m, 0);
        let h2 = PerturbationField::edge_normal(m.polygon(), 2);
        let h12 = h1.combine(1.0, &h2, 1.0);
        let solve = |h: &PerturbationField| solve_transmission(&m, &assemble_sources(&m, &u, h, &betas).unwrap()).unwrap().trace;
        let (a, b, c) = (solve(&h1), solve(&h2), solve(&h12));
        let diff: f64 = a.values().iter().zip(b.values()).zip(c.values()).map(|((x, y), z)| (x + y - z).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = c.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * scale, "{diff} vs {scale}");
    }

    #[test]
    fn leading_delta_terms_cancel() {
        let m = square_model(0.04, 2.0);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let betas = m.betas(&u).unwrap();
        let src = assemble_sources(&m, &u, &outward(&m, 0), &betas).unwrap();
        let v = m.forward(&m.fourier(1, true)).unwrap();
        let vg = vertex_values(&m, &v).unwrap();
        for r in delta_terms(&src.singular, &vg, &[0.4, 0.1, 0.01]) {
            assert!(r.vertex_term.abs() > 1e-4);
            assert!(r.cancellation() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn compatibility_residual_decays_for_diagonal_motion() {
        let m = square_model(0.01, 2.0);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let betas = m.betas(&u).unwrap();
        let h = outward(&m, 0);
        let src = assemble_sources(&m, &u, &h, &betas).unwrap();
        let rows = check_compatibility(&m, &u, &h, &src, &betas, &[0.2, 0.1, 0.05, 0.025]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].residual().abs() < w[0].residual().abs(), "{rows:?}");
        }
        let last = rows[rows.len() - 1];
        assert!(last.residual().abs() < 1e-2 * last.scale(), "{last:?}");
    }

    #[test]
    fn delta_csv_header() {
        let rows = [DeltaRow { delta: 0.1, vertex_term: 1.0, singular_term: -1.0 }];
        let csv = delta_csv(&rows);
        assert!(csv.starts_with("delta,vertex_term,singular_term,sum\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
