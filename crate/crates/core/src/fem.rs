//! Piecewise-linear finite elements for the conductivity problems: forward,
//! material-derivative, jump-data transmission and the two degenerate cases.

use std::fmt::Write as _;
use std::sync::Arc;

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};

use crate::corner::Contrast;
use crate::error::{Error, Result};
use crate::geometry::{Mesh, OuterDomain, PointLocator, Region, Vec2};

/// Function on the outer boundary nodes, counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    nodes: Vec<usize>,
    arc: Vec<f64>,
    /// `seg[j]`: chord length from node `j` to node `j + 1` (cyclic).
    seg: Vec<f64>,
    values: Vec<f64>,
    mode: Option<(usize, bool)>,
}

impl BoundaryFunction {
    /// Zero function on the boundary nodes of `mesh`.
    pub fn zero(mesh: &Mesh, omega: &OuterDomain) -> Self {
        let nodes = mesh.boundary_nodes();
        let arc = nodes.iter().map(|&k| omega.arc_length_of(mesh.node(k))).collect();
        let n = nodes.len();
        let seg = (0..n).map(|j| mesh.node(nodes[j]).dist(mesh.node(nodes[(j + 1) % n]))).collect();
        BoundaryFunction { values: vec![0.0; n], nodes, arc, seg, mode: None }
    }

    /// Nodal interpolant of `f`, not normalized.
    pub fn from_fn(mesh: &Mesh, omega: &OuterDomain, f: impl Fn(Vec2) -> f64) -> Self {
        let mut b = Self::zero(mesh, omega);
        b.values = b.nodes.iter().map(|&k| f(mesh.node(k))).collect();
        b
    }

    /// Current `cos(2 pi m s / L)` or `sin(...)` in arc length, with its tiny
    /// discrete mean removed.
    pub fn fourier(mesh: &Mesh, omega: &OuterDomain, m: usize, sine: bool) -> Self {
        let mut b = Self::zero(mesh, omega);
        let l = omega.boundary_length();
        b.values = b
            .arc
            .iter()
            .map(|&s| {
                let t = 2.0 * std::f64::consts::PI * m as f64 * s / l;
                if sine {
                    t.sin()
                } else {
                    t.cos()
                }
            })
            .collect();
        b.mode = Some((m, sine));
        b.mean_normalized()
    }

    /// The 2M currents `cos, sin` for `m = 1..=M`, interleaved.
    pub fn fourier_family(mesh: &Mesh, omega: &OuterDomain, modes: usize) -> Vec<Self> {
        (1..=modes).flat_map(|m| [Self::fourier(mesh, omega, m, false), Self::fourier(mesh, omega, m, true)]).collect()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        BoundaryFunction { values, mode: None, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    /// `(m, sine)` for Fourier currents.
    pub fn fourier_mode(&self) -> Option<(usize, bool)> {
        self.mode
    }

    pub fn length(&self) -> f64 {
        self.seg.iter().sum()
    }

    /// `int f w` for the nodal hat functions `w` (consistent boundary mass).
    pub fn mass_times(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let k = (j + 1) % n;
            let l = self.seg[j];
            out[j] += l / 6.0 * (2.0 * self.values[j] + self.values[k]);
            out[k] += l / 6.0 * (self.values[j] + 2.0 * self.values[k]);
        }
        out
    }

    pub fn integral(&self) -> f64 {
        self.mass_times().iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.length()
    }

    pub fn mean_normalized(&self) -> Self {
        let m = self.mean();
        let mut b = self.clone();
        b.values.iter_mut().for_each(|v| *v -= m);
        b
    }

    fn check_layout(&self, other: &Self) {
        assert_eq!(self.nodes, other.nodes, "boundary functions on different meshes");
    }

    /// `L^2` inner product of the piecewise-linear interpolants.
    pub fn inner(&self, other: &Self) -> f64 {
        self.check_layout(other);
        self.mass_times().iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_layout(other);
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self.check_layout(other);
        self.with_values(self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.with_values(self.values.iter().map(|x| a * x).collect())
    }

    /// `||self - other|| / ||other||`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        self.sub(other).norm() / other.norm()
    }

    /// Piecewise-linear value at arc length `s`.
    pub fn sample(&self, s: f64, perimeter: f64) -> f64 {
        let n = self.len();
        let s = s.rem_euclid(perimeter);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.arc[a].partial_cmp(&self.arc[b]).unwrap());
        let pos = order.partition_point(|&j| self.arc[j] <= s);
        let (j0, j1) = (order[(pos + n - 1) % n], order[pos % n]);
        let (s0, mut s1) = (self.arc[j0], self.arc[j1]);
        let mut s = s;
        if s1 <= s0 {
            s1 += perimeter;
            if s < s0 {
                s += perimeter;
            }
        }
        let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        (1.0 - t) * self.values[j0] + t * self.values[j1]
    }

    /// Values resampled onto the nodes of `template` (by arc length), then
    /// mean-normalized there.
    pub fn resampled_onto(&self, template: &Self, perimeter: f64) -> Self {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.arc[a].partial_cmp(&self.arc[b]).unwrap());
        let sorted_s: Vec<f64> = order.iter().map(|&j| self.arc[j]).collect();
        let vals = template
            .arc
            .iter()
            .map(|&s| {
                let s = s.rem_euclid(perimeter);
                let pos = sorted_s.partition_point(|&x| x <= s);
                let (a, b) = ((pos + n - 1) % n, pos % n);
                let (mut s0, mut s1) = (sorted_s[a], sorted_s[b]);
                if pos == 0 {
                    s0 -= perimeter;
                }
                if pos == n {
                    s1 += perimeter;
                }
                let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
                (1.0 - t) * self.values[order[a]] + t * self.values[order[b]]
            })
            .collect();
        template.with_values(vals).mean_normalized()
    }

    /// CSV with header `arc_length,value`, sorted by arc length.
    pub fn to_csv(&self) -> String {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.arc[a].partial_cmp(&self.arc[b]).unwrap());
        let mut s = String::from("arc_length,value\n");
        for j in order {
            let _ = writeln!(s, "{:.12e},{:.12e}", self.arc[j], self.values[j]);
        }
        s
    }
}

/// Nodal values of a piecewise-linear field. On a duplicated mesh the two
/// copies of an interface node may differ.
#[derive(Debug, Clone, PartialEq)]
pub struct FemField {
    values: Vec<f64>,
}

impl FemField {
    pub fn new(values: Vec<f64>) -> Self {
        FemField { values }
    }

    pub fn zeros(n: usize) -> Self {
        FemField { values: vec![0.0; n] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> Self {
        FemField { values: mesh.nodes().iter().map(|&p| f(p)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Value at node `k` as seen from `region`.
    pub fn value_in(&self, mesh: &Mesh, k: usize, region: Region) -> f64 {
        match region {
            Region::Inside => self.values[k],
            Region::Outside => self.values[mesh.twin(k)],
        }
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, mesh: &Mesh, t: usize) -> Vec2 {
        let g = shape_gradients(mesh, t);
        let tri = mesh.triangles()[t];
        (0..3).fold(Vec2::ZERO, |acc, i| acc + g[i] * self.values[tri[i]])
    }

    /// Linear interpolation at `p` on the side `region`.
    pub fn interpolate(&self, mesh: &Mesh, loc: &PointLocator, p: Vec2, region: Option<Region>) -> Option<f64> {
        let (t, l) = loc.locate(mesh, p, region)?;
        let tri = mesh.triangles()[t];
        Some((0..3).map(|i| l[i] * self.values[tri[i]]).sum())
    }

    /// Largest `|value(inside) - value(outside twin)|`.
    pub fn twin_gap(&self, mesh: &Mesh) -> f64 {
        mesh.twins().iter().map(|&(i, o)| (self.values[i] - self.values[o]).abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: f64) -> Self {
        FemField { values: self.values.iter().map(|x| a * x).collect() }
    }

    pub fn add_scaled(&self, a: f64, other: &Self) -> Self {
        FemField { values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// CSV with header `node_index,x,y,region,value`; interface nodes report
    /// region code 2 unless the mesh is duplicated.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut region = vec![u8::MAX; mesh.n_nodes()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                let c = mesh.regions()[t].code();
                region[v] = if region[v] == u8::MAX || region[v] == c { c } else { 2 };
            }
        }
        let mut s = String::from("node_index,x,y,region,value\n");
        for (k, p) in mesh.nodes().iter().enumerate() {
            let _ = writeln!(s, "{k},{:.12e},{:.12e},{},{:.12e}", p.x, p.y, region[k], self.values[k]);
        }
        s
    }
}

/// Gradients of the three barycentric shape functions on triangle `t`.
pub fn shape_gradients(mesh: &Mesh, t: usize) -> [Vec2; 3] {
    let [a, b, c] = mesh.triangles()[t].map(|v| mesh.node(v));
    let two_a = (b - a).cross(c - a);
    [
        Vec2::new(b.y - c.y, c.x - b.x) * (1.0 / two_a),
        Vec2::new(c.y - a.y, a.x - c.x) * (1.0 / two_a),
        Vec2::new(a.y - b.y, b.x - a.x) * (1.0 / two_a),
    ]
}

const NONE: usize = usize::MAX;

/// Factorized stiffness operator for one mesh and contrast.
///
/// Finite contrasts and the insulating case solve a pure Neumann problem;
/// one node is pinned, the load is first projected onto the compatible
/// subspace and the result shifted to zero boundary mean. This reproduces the
/// mean-value multiplier formulation exactly. The conducting case grounds all
/// interface nodes instead.
pub struct FemSolver {
    mesh: Arc<Mesh>,
    contrast: Contrast,
    sigma: Vec<f64>,
    dof: Vec<usize>,
    n_dof: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    /// `int_{dOmega} phi_k` per node.
    bmass: Vec<f64>,
    neumann: bool,
}

impl FemSolver {
    pub fn new(mesh: &Arc<Mesh>, contrast: Contrast) -> Result<Self> {
        let mesh_ref = Arc::clone(mesh);
        let mesh: &Mesh = &mesh_ref;
        if let Contrast::Finite(k) = contrast {
            Contrast::finite(k)?;
        }
        let n = mesh.n_nodes();
        let sigma: Vec<f64> = mesh.regions().iter().map(|&r| contrast.sigma(r)).collect();
        let neumann = contrast != Contrast::Conducting;
        let mut active = vec![false; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if sigma[t] > 0.0 {
                tri.iter().for_each(|&v| active[v] = true);
            }
        }
        if contrast == Contrast::Conducting {
            for (k, tag) in mesh.tags().iter().enumerate() {
                if tag.on_interface() {
                    active[k] = false;
                    active[mesh.twin(k)] = false;
                }
            }
        }
        let mut bmass = vec![0.0; n];
        for e in mesh.boundary_edges() {
            let l = mesh.node(e[0]).dist(mesh.node(e[1]));
            bmass[e[0]] += 0.5 * l;
            bmass[e[1]] += 0.5 * l;
        }
        let pin = if neumann { mesh.boundary_edges()[0][0] } else { NONE };
        let mut dof = vec![NONE; n];
        let mut n_dof = 0;
        for k in 0..n {
            if !active[k] || k == pin {
                continue;
            }
            // twins of a continuous field share one unknown
            let tw = mesh.twin(k);
            if tw < k && active[tw] && contrast.k().is_some() {
                dof[k] = dof[tw];
                continue;
            }
            dof[k] = n_dof;
            n_dof += 1;
        }
        let mut trips = Vec::with_capacity(9 * mesh.triangles().len());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if sigma[t] == 0.0 {
                continue;
            }
            let ke = element_stiffness(mesh, t, sigma[t]);
            for i in 0..3 {
                let di = dof[tri[i]];
                if di == NONE {
                    continue;
                }
                for j in 0..3 {
                    let dj = dof[tri[j]];
                    if dj != NONE && dj <= di {
                        trips.push(Triplet::new(di, dj, ke[i][j]));
                    }
                }
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n_dof, n_dof, &trips)
            .map_err(|e| Error::SolverDivergence(format!("assembly: {e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SolverDivergence(format!("factorization: {e:?}")))?;
        Ok(FemSolver { mesh: mesh_ref, contrast, sigma, dof, n_dof, llt, bmass, neumann })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn contrast(&self) -> Contrast {
        self.contrast
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    /// Conductivity of triangle `t` (zero for excluded triangles).
    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t]
    }

    /// `int_{dOmega} phi_k` per node.
    pub fn boundary_mass(&self) -> &[f64] {
        &self.bmass
    }

    /// Whether node `k` carries an unknown (or is the pinned node).
    pub fn is_free(&self, k: usize) -> bool {
        self.dof[k] != NONE || (self.neumann && k == self.mesh.boundary_edges()[0][0])
    }

    /// Node-level `a(u, phi_k)` for all `k`, using the region-wise conductivity.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            if self.sigma[t] == 0.0 {
                continue;
            }
            let ke = element_stiffness(&self.mesh, t, self.sigma[t]);
            for i in 0..3 {
                out[tri[i]] += (0..3).map(|j| ke[i][j] * u[tri[j]]).sum::<f64>();
            }
        }
        out
    }

    /// `a(u, u)`.
    pub fn energy(&self, u: &FemField) -> f64 {
        self.apply(&u.values).iter().zip(&u.values).map(|(a, b)| a * b).sum()
    }

    /// Galerkin residual `max_k |a(u, phi_k) - load_k|` over free test
    /// functions (twins of a continuous space combined).
    pub fn galerkin_residual(&self, u: &FemField, load: &[f64]) -> f64 {
        let au = self.apply(&u.values);
        let mut r = vec![0.0; self.n_dof];
        for k in 0..au.len() {
            if self.dof[k] != NONE {
                r[self.dof[k]] += au[k] - load[k];
            }
        }
        r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Solves `a(u, v) = load(v)` for node-level loads. With `lifting`, the
    /// solution is `w + lifting` where `w` is sought in the continuous space;
    /// this imposes `[u] = lifting(outside twin) - lifting(inside)` across a
    /// duplicated interface.
    pub fn solve_load(&self, load: &[f64], lifting: Option<&[f64]>) -> Result<FemField> {
        Ok(self.solve_many(&[load.to_vec()], lifting.map(|l| vec![l.to_vec()]).as_deref())?.remove(0))
    }

    /// Several right-hand sides with one triangular solve sweep.
    pub fn solve_many(&self, loads: &[Vec<f64>], liftings: Option<&[Vec<f64>]>) -> Result<Vec<FemField>> {
        let n = self.mesh.n_nodes();
        let m = loads.len();
        let mut full: Vec<Vec<f64>> = loads.to_vec();
        if let Some(ls) = liftings {
            for (b, l) in full.iter_mut().zip(ls) {
                let al = self.apply(l);
                b.iter_mut().zip(&al).for_each(|(x, y)| *x -= y);
            }
        }
        let total_b: f64 = self.bmass.iter().sum();
        let mut rhs = Mat::<f64>::zeros(self.n_dof, m);
        for (c, b) in full.iter_mut().enumerate() {
            if b.len() != n {
                return Err(Error::MeshMismatch);
            }
            if self.neumann {
                let (s, a): (f64, f64) = (0..n)
                    .filter(|&k| self.is_free(k))
                    .fold((0.0, 0.0), |(s, a), k| (s + b[k], a + b[k].abs()));
                if s.abs() > 1e-8 * a.max(1e-300) {
                    return Err(Error::IncompatibleData(s / a));
                }
                let mu = s / total_b;
                b.iter_mut().zip(&self.bmass).for_each(|(x, w)| *x -= mu * w);
            }
            for k in 0..n {
                if self.dof[k] != NONE {
                    rhs[(self.dof[k], c)] += b[k];
                }
            }
        }
        let rhs_copy = rhs.clone();
        self.llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        let mut out = Vec::with_capacity(m);
        for c in 0..m {
            let mut u: Vec<f64> = (0..n).map(|k| if self.dof[k] != NONE { rhs[(self.dof[k], c)] } else { 0.0 }).collect();
            // residual check in dof space
            let au = self.apply(&u);
            let mut r = vec![0.0; self.n_dof];
            for k in 0..n {
                if self.dof[k] != NONE {
                    r[self.dof[k]] += au[k];
                }
            }
            let (mut rn, mut bn) = (0.0f64, 0.0f64);
            for d in 0..self.n_dof {
                rn = rn.max((r[d] - rhs_copy[(d, c)]).abs());
                bn = bn.max(rhs_copy[(d, c)].abs());
            }
            if rn > 1e-7 * bn.max(1e-300) {
                return Err(Error::SolverDivergence(format!("residual {rn:e} against load {bn:e}")));
            }
            if let Some(ls) = liftings {
                u.iter_mut().zip(&ls[c]).for_each(|(x, y)| *x += y);
            }
            if self.neumann {
                let mean = u.iter().zip(&self.bmass).map(|(a, w)| a * w).sum::<f64>() / total_b;
                for k in 0..n {
                    if self.is_free(k) || liftings.is_some_and(|l| l[c][k] != 0.0) {
                        u[k] -= mean;
                    }
                }
            }
            out.push(FemField { values: u });
        }
        Ok(out)
    }

    /// Node-level load `int f phi_k ds` on the outer boundary.
    pub fn current_load(&self, f: &BoundaryFunction) -> Vec<f64> {
        let mut load = vec![0.0; self.mesh.n_nodes()];
        for (&k, v) in f.nodes().iter().zip(f.mass_times()) {
            load[k] = v;
        }
        load
    }

    /// Forward solve with boundary current `f`.
    pub fn solve_forward(&self, f: &BoundaryFunction) -> Result<FemField> {
        Ok(self.solve_forward_many(std::slice::from_ref(f))?.remove(0))
    }

    pub fn solve_forward_many(&self, fs: &[BoundaryFunction]) -> Result<Vec<FemField>> {
        let mut loads = Vec::with_capacity(fs.len());
        for f in fs {
            let scale = f.values().iter().fold(0.0f64, |m, x| m.max(x.abs())) * f.length();
            let integral = f.integral();
            if integral.abs() > 1e-8 * scale.max(1e-300) {
                return Err(Error::NonZeroMeanCurrent(integral));
            }
            loads.push(self.current_load(f));
        }
        self.solve_many(&loads, None)
    }

    /// Load of the material-derivative problem,
    /// `-int sigma grad u . (A_H grad phi_k)` with `A_H = (div H) I - DH - DH^T`
    /// for the nodal interpolant of `H` (constant per triangle).
    pub fn material_load(&self, u: &FemField, h_nodes: &[Vec2]) -> Vec<f64> {
        let mut load = vec![0.0; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            if self.sigma[t] == 0.0 {
                continue;
            }
            let a = anisotropy_on(&self.mesh, t, h_nodes);
            let g = shape_gradients(&self.mesh, t);
            let gu = (0..3).fold(Vec2::ZERO, |acc, i| acc + g[i] * u.values[tri[i]]);
            let area = self.mesh.area(t);
            for i in 0..3 {
                let ag = Vec2::new(a[0][0] * g[i].x + a[0][1] * g[i].y, a[1][0] * g[i].x + a[1][1] * g[i].y);
                load[tri[i]] -= self.sigma[t] * area * gu.dot(ag);
            }
        }
        load
    }

    /// Material derivative for the perturbation whose extension has nodal
    /// values `h_nodes`.
    pub fn solve_material(&self, u: &FemField, h_nodes: &[Vec2]) -> Result<FemField> {
        if h_nodes.len() != self.mesh.n_nodes() || u.values.len() != self.mesh.n_nodes() {
            return Err(Error::MeshMismatch);
        }
        self.solve_load(&self.material_load(u, h_nodes), None)
    }
}

/// `(div H) I - DH - DH^T` on triangle `t` for nodal `H`.
pub fn anisotropy_on(mesh: &Mesh, t: usize, h_nodes: &[Vec2]) -> [[f64; 2]; 2] {
    let g = shape_gradients(mesh, t);
    let tri = mesh.triangles()[t];
    // dh[a][b] = d H_a / d x_b
    let mut dh = [[0.0; 2]; 2];
    for i in 0..3 {
        let h = h_nodes[tri[i]];
        dh[0][0] += h.x * g[i].x;
        dh[0][1] += h.x * g[i].y;
        dh[1][0] += h.y * g[i].x;
        dh[1][1] += h.y * g[i].y;
    }
    let div = dh[0][0] + dh[1][1];
    [
        [div - 2.0 * dh[0][0], -dh[0][1] - dh[1][0]],
        [-dh[1][0] - dh[0][1], div - 2.0 * dh[1][1]],
    ]
}

fn element_stiffness(mesh: &Mesh, t: usize, sigma: f64) -> [[f64; 3]; 3] {
    let g = shape_gradients(mesh, t);
    let a = sigma * mesh.area(t);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = a * g[i].dot(g[j]);
        }
    }
    k
}

/// Nodal values of an extension field.
pub fn nodal_extension(mesh: &Mesh, ext: &crate::geometry::ExtensionField) -> Vec<Vec2> {
    mesh.nodes().iter().map(|&p| ext.eval(p)).collect()
}

/// Boundary restriction, mean-normalized.
pub fn boundary_trace(mesh: &Mesh, omega: &OuterDomain, u: &FemField) -> BoundaryFunction {
    let b = BoundaryFunction::zero(mesh, omega);
    let v = b.nodes().iter().map(|&k| u.values[k]).collect();
    b.with_values(v).mean_normalized()
}

/// Node-level load `int F phi_k dx` for a volume source given pointwise on
/// each side; `support` filters triangles worth integrating.
pub fn volume_load(
    mesh: &Mesh,
    f: impl Fn(Vec2, Region) -> f64,
    support: impl Fn(usize) -> bool,
    degree: usize,
) -> Vec<f64> {
    let rule = crate::quadrature::triangle_rule(degree);
    let mut load = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !support(t) {
            continue;
        }
        let p = tri.map(|v| mesh.node(v));
        let area = mesh.area(t);
        let region = mesh.regions()[t];
        for (l, w) in &rule {
            let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            let fx = f(x, region) * w * area;
            for i in 0..3 {
                load[tri[i]] += fx * l[i];
            }
        }
    }
    load
}
