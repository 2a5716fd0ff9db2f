use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OuterDomain, Polygon, Triangulation, Vec2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Inside the inclusion.
    Inside,
    /// Between the inclusion and the outer boundary.
    Outside,
}

impl Region {
    pub fn code(self) -> u8 {
        match self {
            Region::Inside => 0,
            Region::Outside => 1,
        }
    }
}

/// Where a node sits relative to the geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeTag {
    Interior,
    /// On the outer boundary.
    Boundary,
    /// On polygon edge `edge` at parameter `s` in `(0, 1)`.
    Edge { edge: usize, s: f64 },
    /// At polygon vertex `i`.
    Vertex(usize),
}

impl NodeTag {
    pub fn on_interface(self) -> bool {
        matches!(self, NodeTag::Edge { .. } | NodeTag::Vertex(_))
    }
}

/// Mesh edge on the polygon boundary, oriented along the counterclockwise
/// traversal. `a`, `b` are the inside-side nodes, `a_out`, `b_out` the
/// outside-side ones (equal to `a`, `b` unless the interface is duplicated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    pub edge: usize,
    pub a: usize,
    pub b: usize,
    pub a_out: usize,
    pub b_out: usize,
    pub s0: f64,
    pub s1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub hmax: f64,
    /// Size ratio per grading level, in `(0, 1]`.
    pub grading: f64,
    /// Number of grading levels; the smallest corner size is `hmax * grading^levels`.
    pub levels: u32,
    pub seed: u64,
    pub duplicate_interface: bool,
    pub smoothing_iterations: usize,
}

impl MeshOptions {
    pub fn new(hmax: f64) -> Self {
        MeshOptions { hmax, grading: 0.5, levels: 5, seed: 1, duplicate_interface: false, smoothing_iterations: 8 }
    }

    pub fn grading(mut self, grading: f64, levels: u32) -> Self {
        self.grading = grading;
        self.levels = levels;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn duplicated(mut self, yes: bool) -> Self {
        self.duplicate_interface = yes;
        self
    }

    pub fn hmin(&self) -> f64 {
        self.hmax * self.grading.powi(self.levels as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Smallest angle over all triangles, degrees.
    pub min_angle: f64,
    /// Smallest angle over triangles not touching a polygon vertex, degrees.
    pub min_angle_off_fans: f64,
    pub min_area: f64,
    pub max_edge: f64,
    pub min_edge: f64,
}

/// Interface-conforming triangulation of the outer domain.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    tags: Vec<NodeTag>,
    interface: Vec<InterfaceEdge>,
    boundary: Vec<[usize; 2]>,
    twins: Vec<(usize, usize)>,
    twin_of: Vec<usize>,
    hmax: f64,
    hmin: f64,
    slope: f64,
}

/// Target element size: linear growth with distance to the nearest polygon
/// vertex, clamped to `[hmin, hmax]`.
struct Sizing {
    verts: Vec<Vec2>,
    slope: f64,
    hmin: f64,
    hmax: f64,
}

impl Sizing {
    fn nearest(&self, p: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, v) in self.verts.iter().enumerate() {
            let d = p.dist(*v);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn at(&self, p: Vec2) -> f64 {
        (self.slope * self.nearest(p).1).clamp(self.hmin, self.hmax)
    }

    /// Distance beyond which the size is `hmax`.
    fn reach(&self) -> f64 {
        self.hmax / self.slope
    }
}

/// Parameters in `(0, 1)` subdividing segment `a -> b` according to the sizing.
fn subdivide(a: Vec2, b: Vec2, sizing: &Sizing) -> Vec<f64> {
    let len = a.dist(b);
    let m = ((4.0 * len / sizing.hmin) as usize).clamp(2000, 400_000);
    let mut cum = vec![0.0; m + 1];
    let mut prev = 1.0 / sizing.at(a);
    for k in 1..=m {
        let s = k as f64 / m as f64;
        let cur = 1.0 / sizing.at(a.lerp(b, s));
        cum[k] = cum[k - 1] + 0.5 * (prev + cur) * len / m as f64;
        prev = cur;
    }
    let total = cum[m];
    let n = (total.round() as usize).max(1);
    let mut out = Vec::with_capacity(n - 1);
    let mut k = 0;
    for j in 1..n {
        let target = total * j as f64 / n as f64;
        while cum[k + 1] < target {
            k += 1;
        }
        let f = (target - cum[k]) / (cum[k + 1] - cum[k]);
        out.push((k as f64 + f) / m as f64);
    }
    out
}

/// Builds the mesh: fixed nodes on both boundaries (graded along polygon
/// edges), a jittered hexagonal lattice in the bulk, concentric rings around
/// each polygon vertex, then a few rounds of spring smoothing with constrained
/// Delaunay retriangulation.
pub fn generate_mesh(poly: &Polygon, omega: &OuterDomain, opts: &MeshOptions) -> Result<Mesh> {
    if !(opts.hmax > 0.0) || !(opts.grading > 0.0 && opts.grading <= 1.0) {
        return Err(Error::MeshFailure(format!("invalid hmax {} or grading {}", opts.hmax, opts.grading)));
    }
    let rmin = poly.radii().iter().copied().fold(f64::INFINITY, f64::min);
    let sizing = Sizing {
        verts: poly.vertices().to_vec(),
        slope: (opts.hmax / rmin).clamp(0.3, 0.6),
        hmin: opts.hmin(),
        hmax: opts.hmax,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // fixed nodes
    let mut pts: Vec<Vec2> = Vec::new();
    let mut tags: Vec<NodeTag> = Vec::new();
    let outer_nodes = omega.boundary_nodes(opts.hmax);
    let n_outer = outer_nodes.len();
    pts.extend(&outer_nodes);
    tags.extend(std::iter::repeat_n(NodeTag::Boundary, n_outer));
    let n = poly.len();
    let mut edge_nodes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let vertex_base = pts.len();
    for i in 0..n {
        pts.push(poly.vertex(i));
        tags.push(NodeTag::Vertex(i));
    }
    for j in 0..n {
        let (a, b) = poly.edge(j);
        let mut list = vec![(vertex_base + j, 0.0)];
        for s in subdivide(a, b, &sizing) {
            list.push((pts.len(), s));
            pts.push(a.lerp(b, s));
            tags.push(NodeTag::Edge { edge: j, s });
        }
        list.push((vertex_base + (j + 1) % n, 1.0));
        edge_nodes.push(list);
    }
    let n_fixed = pts.len();
    let mut segments: Vec<(usize, usize)> = (0..n_outer).map(|k| (k, (k + 1) % n_outer)).collect();
    for list in &edge_nodes {
        for w in list.windows(2) {
            segments.push((w[0].0, w[1].0));
        }
    }

    let constraint_distance = |p: Vec2| omega.inside_distance(p).min(poly.boundary_distance(p).0);
    let admissible = |p: Vec2, s: f64| omega.inside_distance(p) > 0.0 && constraint_distance(p) >= 0.6 * s;

    // bulk lattice
    let h = opts.hmax;
    let rot = rng.random::<f64>() * PI / 3.0;
    let shift = Vec2::new(rng.random::<f64>(), rng.random::<f64>()) * h;
    let (lo, hi) = bbox(&outer_nodes);
    let radius = (hi - lo).norm();
    let centre = (lo + hi) * 0.5;
    let rows = (radius / (h * 0.75f64.sqrt())).ceil() as i64 + 1;
    let cols = (radius / h).ceil() as i64 + 1;
    let (ex, ey) = (Vec2::polar(1.0, rot), Vec2::polar(1.0, rot + PI / 2.0));
    let reach = sizing.reach();
    for r in -rows..=rows {
        for c in -cols..=cols {
            let u = c as f64 * h + if r.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
            let v = r as f64 * h * 0.75f64.sqrt();
            let jitter = Vec2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * (0.1 * h);
            let p = centre + shift + ex * u + ey * v + jitter;
            if sizing.nearest(p).1 < reach + 0.6 * h {
                continue;
            }
            if admissible(p, h) {
                pts.push(p);
                tags.push(NodeTag::Interior);
            }
        }
    }
    // corner rings
    for i in 0..n {
        let x = poly.vertex(i);
        let mut rho = sizing.hmin;
        while rho <= reach {
            let s = (sizing.slope * rho).max(sizing.hmin);
            let m = ((2.0 * PI * rho / s).round() as usize).max(3);
            let phase = rng.random::<f64>() * 2.0 * PI;
            for k in 0..m {
                let p = x + Vec2::polar(rho, phase + 2.0 * PI * k as f64 / m as f64);
                if sizing.nearest(p).0 != i {
                    continue;
                }
                if admissible(p, sizing.at(p)) {
                    pts.push(p);
                    tags.push(NodeTag::Interior);
                }
            }
            rho += s * 0.75f64.sqrt();
        }
    }

    // spring smoothing on the free nodes
    for _ in 0..opts.smoothing_iterations {
        let tris = triangulate(&pts, &segments)?;
        let edges = unique_edges(&tris);
        let mut sum_l2 = 0.0;
        let mut sum_s2 = 0.0;
        let lens: Vec<(f64, f64)> = edges
            .iter()
            .map(|&(a, b)| {
                let l = pts[a].dist(pts[b]);
                let s = sizing.at((pts[a] + pts[b]) * 0.5);
                sum_l2 += l * l;
                sum_s2 += s * s;
                (l, s)
            })
            .collect();
        let fscale = 1.2 * (sum_l2 / sum_s2).sqrt();
        let mut force = vec![Vec2::ZERO; pts.len()];
        for (&(a, b), &(l, s)) in edges.iter().zip(&lens) {
            let f = (s * fscale - l).max(0.0) / l;
            let d = (pts[a] - pts[b]) * f;
            force[a] += d;
            force[b] -= d;
        }
        for k in n_fixed..pts.len() {
            let s = sizing.at(pts[k]);
            let mut step = force[k] * 0.2;
            let len = step.norm();
            if len > 0.3 * s {
                step = step * (0.3 * s / len);
            }
            let q = pts[k] + step;
            if omega.inside_distance(q) > 0.0 && constraint_distance(q) >= 0.45 * sizing.at(q) {
                pts[k] = q;
            }
        }
    }
    let tris = triangulate(&pts, &segments)?;
    let mut used = vec![false; pts.len()];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(Error::MeshFailure(format!("node {k} not covered by the triangulation")));
    }
    let regions: Vec<Region> = tris
        .iter()
        .map(|t| {
            let c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) * (1.0 / 3.0);
            if poly.contains(c) {
                Region::Inside
            } else {
                Region::Outside
            }
        })
        .collect();
    let mut interface = Vec::new();
    for (j, list) in edge_nodes.iter().enumerate() {
        for w in list.windows(2) {
            interface.push(InterfaceEdge {
                edge: j,
                a: w[0].0,
                b: w[1].0,
                a_out: w[0].0,
                b_out: w[1].0,
                s0: w[0].1,
                s1: w[1].1,
            });
        }
    }
    let boundary = (0..n_outer).map(|k| [k, (k + 1) % n_outer]).collect();
    let count = pts.len();
    let mut mesh = Mesh {
        nodes: pts,
        triangles: tris,
        regions,
        tags,
        interface,
        boundary,
        twins: Vec::new(),
        twin_of: (0..count).collect(),
        hmax: opts.hmax,
        hmin: sizing.hmin,
        slope: sizing.slope,
    };
    if opts.duplicate_interface {
        mesh.duplicate_interface();
    }
    let q = mesh.quality();
    if q.min_area <= 0.0 || q.min_angle < 2.0 {
        return Err(Error::MeshFailure(format!(
            "degenerate triangles (min angle {:.2} deg, min area {:e})",
            q.min_angle, q.min_area
        )));
    }
    Ok(mesh)
}

fn bbox(p: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for q in p {
        lo = Vec2::new(lo.x.min(q.x), lo.y.min(q.y));
        hi = Vec2::new(hi.x.max(q.x), hi.y.max(q.y));
    }
    (lo, hi)
}

fn triangulate(pts: &[Vec2], segments: &[(usize, usize)]) -> Result<Vec<[usize; 3]>> {
    let mut t = Triangulation::new(pts)?;
    for &(a, b) in segments {
        t.insert_constraint(a, b)?;
    }
    Ok(t.interior_triangles())
}

fn unique_edges(tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            (a.min(b), a.max(b))
        }))
        .collect();
    e.sort_unstable();
    e.dedup();
    e
}

fn angle_deg(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let u = b - a;
    let v = c - a;
    u.cross(v).abs().atan2(u.dot(v)).to_degrees()
}

impl Mesh {
    fn duplicate_interface(&mut self) {
        let n0 = self.nodes.len();
        let mut twin = vec![usize::MAX; n0];
        for k in 0..n0 {
            if self.tags[k].on_interface() {
                let t = self.nodes.len();
                self.nodes.push(self.nodes[k]);
                self.tags.push(self.tags[k]);
                self.twin_of.push(k);
                twin[k] = t;
                self.twins.push((k, t));
            }
        }
        for (t, tri) in self.triangles.iter_mut().enumerate() {
            if self.regions[t] == Region::Outside {
                for v in tri.iter_mut() {
                    if twin[*v] != usize::MAX {
                        *v = twin[*v];
                    }
                }
            }
        }
        for e in &mut self.interface {
            e.a_out = twin[e.a];
            e.b_out = twin[e.b];
        }
        for &(i, o) in &self.twins {
            self.twin_of[i] = o;
        }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> Vec2 {
        self.nodes[k]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn interface(&self) -> &[InterfaceEdge] {
        &self.interface
    }

    /// Outer boundary edges, counterclockwise.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary
    }

    /// Outer boundary nodes in counterclockwise order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.boundary.iter().map(|e| e[0]).collect()
    }

    /// `(inside node, outside twin)` pairs; empty unless duplicated.
    pub fn twins(&self) -> &[(usize, usize)] {
        &self.twins
    }

    pub fn is_duplicated(&self) -> bool {
        !self.twins.is_empty()
    }

    /// The paired node across the interface, or the node itself.
    pub fn twin(&self, k: usize) -> usize {
        self.twin_of[k]
    }

    pub fn hmax(&self) -> f64 {
        self.hmax
    }

    pub fn hmin(&self) -> f64 {
        self.hmin
    }

    /// Growth rate of the element size with distance to the nearest vertex.
    pub fn grading_slope(&self) -> f64 {
        self.slope
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * (self.nodes[b] - self.nodes[a]).cross(self.nodes[c] - self.nodes[a])
    }

    /// Node index of polygon vertex `i` on the given side.
    pub fn vertex_node(&self, i: usize, region: Region) -> usize {
        let k = self
            .tags
            .iter()
            .position(|t| *t == NodeTag::Vertex(i))
            .expect("vertex node present");
        match region {
            Region::Inside => k,
            Region::Outside => self.twin_of[k],
        }
    }

    /// Nodes referenced by at least one triangle of `region`.
    pub fn region_nodes(&self, region: Region) -> Vec<bool> {
        let mut m = vec![false; self.nodes.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.regions[t] == region {
                for &v in tri {
                    m[v] = true;
                }
            }
        }
        m
    }

    pub fn quality(&self) -> MeshQuality {
        let mut q = MeshQuality {
            min_angle: 180.0,
            min_angle_off_fans: 180.0,
            min_area: f64::INFINITY,
            max_edge: 0.0,
            min_edge: f64::INFINITY,
        };
        for (t, tri) in self.triangles.iter().enumerate() {
            let p = tri.map(|v| self.nodes[v]);
            let m = angle_deg(p[0], p[1], p[2]).min(angle_deg(p[1], p[2], p[0])).min(angle_deg(p[2], p[0], p[1]));
            q.min_angle = q.min_angle.min(m);
            if !tri.iter().any(|&v| matches!(self.tags[v], NodeTag::Vertex(_))) {
                q.min_angle_off_fans = q.min_angle_off_fans.min(m);
            }
            q.min_area = q.min_area.min(self.area(t));
            for k in 0..3 {
                let l = p[k].dist(p[(k + 1) % 3]);
                q.max_edge = q.max_edge.max(l);
                q.min_edge = q.min_edge.min(l);
            }
        }
        q
    }

    /// Same topology with node `k` moved by `disp[k]`. Fails if any triangle
    /// inverts.
    pub fn transported(&self, disp: &[Vec2]) -> Result<Mesh> {
        if disp.len() != self.nodes.len() {
            return Err(Error::MeshMismatch);
        }
        let mut m = self.clone();
        for (p, d) in m.nodes.iter_mut().zip(disp) {
            *p += *d;
        }
        for t in 0..m.triangles.len() {
            if m.area(t) <= 0.0 {
                return Err(Error::DegeneratePerturbation(format!("triangle {t} inverted by transport")));
            }
        }
        Ok(m)
    }

    /// Text serialization.
    pub fn to_text(&self) -> String {
        let mut s = String::from("polyshape-mesh v1\n");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (k, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{k} {:.17e} {:.17e}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{t} {} {} {} {}", tri[0], tri[1], tri[2], self.regions[t].code());
        }
        let _ = writeln!(s, "interface {}", self.interface.len());
        for e in &self.interface {
            let _ = writeln!(s, "{} {} {} {} {} {:.17e} {:.17e}", e.edge, e.a, e.b, e.a_out, e.b_out, e.s0, e.s1);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        s
    }
}

/// Bucket grid over triangles for point location.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = bbox(mesh.nodes());
        let nt = mesh.triangles.len().max(1);
        let area = ((hi.x - lo.x) * (hi.y - lo.y)).max(1e-300);
        let cell = (area / nt as f64).sqrt() * 2.0;
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let (a, b) = bbox(&tri.map(|v| mesh.nodes[v]));
            let (i0, j0) = Self::cell_of(lo, cell, nx, ny, a);
            let (i1, j1) = Self::cell_of(lo, cell, nx, ny, b);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        let mut start = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        for b in buckets {
            start.push(items.len());
            items.extend(b);
        }
        start.push(items.len());
        PointLocator { lo, cell, nx, ny, start, items }
    }

    fn cell_of(lo: Vec2, cell: f64, nx: usize, ny: usize, p: Vec2) -> (usize, usize) {
        let i = (((p.x - lo.x) / cell).floor().max(0.0) as usize).min(nx - 1);
        let j = (((p.y - lo.y) / cell).floor().max(0.0) as usize).min(ny - 1);
        (i, j)
    }

    /// Triangle containing `p` (restricted to `region` if given) with its
    /// barycentric coordinates. Points slightly outside the region snap to the
    /// triangle with the least negative barycentric coordinate in the cell.
    pub fn locate(&self, mesh: &Mesh, p: Vec2, region: Option<Region>) -> Option<(usize, [f64; 3])> {
        let (i, j) = Self::cell_of(self.lo, self.cell, self.nx, self.ny, p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for jj in j.saturating_sub(1)..=(j + 1).min(self.ny - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(self.nx - 1) {
                let c = jj * self.nx + ii;
                for &t in &self.items[self.start[c]..self.start[c + 1]] {
                    if let Some(r) = region {
                        if mesh.regions[t] != r {
                            continue;
                        }
                    }
                    let l = barycentric(mesh, t, p);
                    let worst = l[0].min(l[1]).min(l[2]);
                    if worst >= 0.0 && ii == i && jj == j {
                        return Some((t, l));
                    }
                    if best.map_or(true, |b| worst > b.2) {
                        best = Some((t, l, worst));
                    }
                }
            }
        }
        best.map(|(t, l, _)| (t, l))
    }
}

pub(crate) fn barycentric(mesh: &Mesh, t: usize, p: Vec2) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.nodes[v]);
    let det = (b - a).cross(c - a);
    let l1 = (p - a).cross(c - a) / det;
    let l2 = (b - a).cross(p - a) / det;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::square;
    use std::collections::HashSet;

    fn setup() -> (Polygon, OuterDomain) {
        let o = OuterDomain::unit_disk();
        (Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap(), o)
    }

    #[test]
    fn uniform_mesh_conforms_to_interface() {
        let (p, o) = setup();
        let m = generate_mesh(&p, &o, &MeshOptions::new(0.1).grading(1.0, 0)).unwrap();
        let edges: HashSet<(usize, usize)> = m
            .triangles()
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        let mut covered = vec![0.0; 4];
        for e in m.interface() {
            assert!(edges.contains(&(e.a.min(e.b), e.a.max(e.b))));
            covered[e.edge] += m.node(e.a).dist(m.node(e.b));
        }
        for j in 0..4 {
            assert!((covered[j] - p.edge_length(j)).abs() < 1e-12);
        }
        let q = m.quality();
        assert!(q.min_angle_off_fans >= 20.0, "{q:?}");
        assert!(q.min_area > 0.0);
        // region tags agree with point-in-polygon at barycentres
        for (t, tri) in m.triangles().iter().enumerate() {
            let c = (m.node(tri[0]) + m.node(tri[1]) + m.node(tri[2])) * (1.0 / 3.0);
            assert_eq!(m.regions()[t] == Region::Inside, p.contains(c));
        }
        let total: f64 = (0..m.triangles().len()).map(|t| m.area(t)).sum();
        let n = m.boundary_edges().len() as f64;
        assert!((total - 0.5 * n * (2.0 * PI / n).sin()).abs() < 1e-10);
    }

    #[test]
    fn graded_corner_fan_size() {
        let (p, o) = setup();
        let m = generate_mesh(&p, &o, &MeshOptions::new(0.05).grading(0.5, 5)).unwrap();
        let target = 0.05 / 32.0;
        let mut smallest = f64::INFINITY;
        for tri in m.triangles() {
            if tri.iter().any(|&v| matches!(m.tags()[v], NodeTag::Vertex(_))) {
                for k in 0..3 {
                    smallest = smallest.min(m.node(tri[k]).dist(m.node(tri[(k + 1) % 3])));
                }
            }
        }
        assert!(smallest > 0.5 * target && smallest < 2.0 * target, "{smallest}");
        let q = m.quality();
        assert!(q.min_angle_off_fans >= 20.0, "{q:?}");
    }

    #[test]
    fn duplicated_interface_pairs() {
        let (p, o) = setup();
        let m = generate_mesh(&p, &o, &MeshOptions::new(0.1).duplicated(true)).unwrap();
        let n_interface = m.tags().iter().filter(|t| t.on_interface()).count() / 2;
        assert_eq!(m.twins().len(), n_interface);
        let inside = m.region_nodes(Region::Inside);
        let outside = m.region_nodes(Region::Outside);
        for &(i, o) in m.twins() {
            assert_eq!(m.node(i).dist(m.node(o)), 0.0);
            assert!(inside[i] && !outside[i]);
            assert!(outside[o] && !inside[o]);
        }
    }

    #[test]
    fn seeds_change_the_mesh_deterministically() {
        let (p, o) = setup();
        let a = generate_mesh(&p, &o, &MeshOptions::new(0.1).seed(3)).unwrap();
        let b = generate_mesh(&p, &o, &MeshOptions::new(0.1).seed(3)).unwrap();
        let c = generate_mesh(&p, &o, &MeshOptions::new(0.1).seed(4)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a.to_text(), c.to_text());
        assert!(a.to_text().starts_with("polyshape-mesh v1\nnodes "));
    }

    #[test]
    fn locator_finds_points() {
        let (p, o) = setup();
        let m = generate_mesh(&p, &o, &MeshOptions::new(0.1)).unwrap();
        let loc = PointLocator::new(&m);
        for k in 0..100 {
            let q = Vec2::polar(0.95 * (k as f64 / 100.0).sqrt(), 2.4 * k as f64);
            let (t, l) = loc.locate(&m, q, None).unwrap();
            assert!(l.iter().all(|&x| x >= -1e-12), "{k} {t} {l:?}");
        }
    }

    #[test]
    fn rectangle_outer_domain() {
        let o = OuterDomain::Rectangle { min: Vec2::new(-1.0, -0.7), max: Vec2::new(1.0, 0.7) };
        let p = Polygon::new(&square(Vec2::ZERO, 0.25), &o).unwrap();
        let m = generate_mesh(&p, &o, &MeshOptions::new(0.08)).unwrap();
        let total: f64 = (0..m.triangles().len()).map(|t| m.area(t)).sum();
        assert!((total - 2.8).abs() < 1e-12);
    }
}
