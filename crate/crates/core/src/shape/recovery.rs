//! One-sided gradient recovery by least-squares quadratic patches. Within the
//! vertex radius the leading corner term is subtracted before fitting and
//! added back analytically.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::corner::{cutoff, CornerSpectrum};
use crate::fem::FemField;
use crate::geometry::{Mesh, PointLocator, Region, Vec2};

/// Linear map from nodal values (and per-vertex corner coefficients) to a
/// recovered gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub nodes: Vec<usize>,
    pub coef: Vec<Vec2>,
    /// Per vertex: gradient of the unit corner term at the point minus its
    /// fitted gradient from the patch.
    pub corner: Vec<Vec2>,
}

impl Stencil {
    /// Recovered gradient of `u`, given the leading corner coefficients.
    pub fn apply(&self, u: &FemField, betas: &[f64]) -> Vec2 {
        let mut g = Vec2::ZERO;
        for (&k, c) in self.nodes.iter().zip(&self.coef) {
            g += *c * u.value(k);
        }
        for (b, c) in betas.iter().zip(&self.corner) {
            g += *c * *b;
        }
        g
    }
}

/// Node-to-triangle incidence per region and a point locator.
#[derive(Debug, Clone)]
pub struct GradientRecovery {
    mesh: Arc<Mesh>,
    locator: PointLocator,
    start: Vec<usize>,
    items: Vec<usize>,
    spectrum: Option<CornerSpectrum>,
}

impl GradientRecovery {
    pub fn new(mesh: &Arc<Mesh>, spectrum: Option<&CornerSpectrum>) -> Self {
        let n = mesh.n_nodes();
        let mut count = vec![0usize; n + 1];
        for tri in mesh.triangles() {
            tri.iter().for_each(|&v| count[v + 1] += 1);
        }
        for k in 0..n {
            count[k + 1] += count[k];
        }
        let mut fill = count.clone();
        let mut items = vec![0; count[n]];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                items[fill[v]] = t;
                fill[v] += 1;
            }
        }
        GradientRecovery {
            mesh: Arc::clone(mesh),
            locator: PointLocator::new(mesh),
            start: count,
            items,
            spectrum: spectrum.cloned(),
        }
    }

    pub fn locator(&self) -> &PointLocator {
        &self.locator
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn spectrum(&self) -> Option<&CornerSpectrum> {
        self.spectrum.as_ref()
    }

    fn triangles_of(&self, v: usize) -> &[usize] {
        &self.items[self.start[v]..self.start[v + 1]]
    }

    /// `chi_i(r) y_1(theta) r^gamma_1` and its gradient for vertex `i`.
    pub fn corner_term(&self, i: usize, p: Vec2, region: Region) -> (f64, Vec2) {
        let Some(spec) = &self.spectrum else {
            return (0.0, Vec2::ZERO);
        };
        let v = spec.vertex(i);
        let r = p.dist(v.position);
        if r >= v.radius || r == 0.0 {
            return (0.0, Vec2::ZERO);
        }
        let (y, gy) = v.leading_term(1.0, p, region);
        let (chi, dchi, _) = cutoff(r, v.radius);
        let er = (p - v.position) * (1.0 / r);
        (chi * y, gy * chi + er * (dchi * y))
    }

    /// Sum of `beta_i` times the corner terms.
    pub fn corner_sum(&self, betas: &[f64], p: Vec2, region: Region) -> (f64, Vec2) {
        let mut acc = (0.0, Vec2::ZERO);
        for (i, &b) in betas.iter().enumerate() {
            if b != 0.0 {
                let (y, g) = self.corner_term(i, p, region);
                acc.0 += b * y;
                acc.1 += g * b;
            }
        }
        acc
    }

    /// `y_1(theta) r^gamma_1` of vertex `i` without cutoff, used inside the
    /// vertex radius only. The cutoff would put large third derivatives into
    /// the remainder on its annulus.
    fn raw_term(&self, i: usize, p: Vec2, region: Region) -> (f64, Vec2) {
        self.spectrum.as_ref().expect("spectrum").vertex(i).leading_term(1.0, p, region)
    }

    /// Stencil at `p` from the triangles of `region` around it.
    pub fn stencil(&self, p: Vec2, region: Region) -> Stencil {
        let mesh = &*self.mesh;
        let (t0, _) = self.locator.locate(mesh, p, Some(region)).expect("point inside the region");
        let mut nodes: Vec<usize> = mesh.triangles()[t0].to_vec();
        let mut seen_tri = vec![t0];
        for _ in 0..2 {
            let ring: Vec<usize> = nodes.clone();
            for v in ring {
                for &t in self.triangles_of(v) {
                    if mesh.regions()[t] != region || seen_tri.contains(&t) {
                        continue;
                    }
                    seen_tri.push(t);
                    for &w in &mesh.triangles()[t] {
                        if !nodes.contains(&w) {
                            nodes.push(w);
                        }
                    }
                }
            }
        }
        let scale = nodes.iter().map(|&k| mesh.node(k).dist(p)).fold(0.0, f64::max).max(1e-300);
        let m = nodes.len();
        let a = DMatrix::from_fn(m, 6, |r, c| {
            let d = (mesh.node(nodes[r]) - p) * (1.0 / scale);
            match c {
                0 => 1.0,
                1 => d.x,
                2 => d.y,
                3 => d.x * d.x,
                4 => d.x * d.y,
                _ => d.y * d.y,
            }
        });
        let pinv = a.pseudo_inverse(1e-12).expect("svd");
        let coef: Vec<Vec2> = (0..m).map(|r| Vec2::new(pinv[(1, r)], pinv[(2, r)]) * (1.0 / scale)).collect();
        let corner = match &self.spectrum {
            None => Vec::new(),
            Some(spec) => (0..spec.len())
                .map(|i| {
                    let v = spec.vertex(i);
                    if p.dist(v.position) >= v.radius {
                        return Vec2::ZERO;
                    }
                    let (_, g) = self.raw_term(i, p, region);
                    let fitted = nodes
                        .iter()
                        .zip(&coef)
                        .fold(Vec2::ZERO, |acc, (&k, c)| acc + *c * self.raw_term(i, mesh.node(k), region).0);
                    g - fitted
                })
                .collect(),
        };
        Stencil { nodes, coef, corner }
    }

    /// Stencil at `p` close to vertex `i`: the remainder gradient is taken
    /// from `anchor` and only the corner term is evaluated at `p`. Within a
    /// few elements of the vertex the discrete remainder is unreliable.
    pub fn frozen_stencil(&self, p: Vec2, anchor: Vec2, i: usize, region: Region) -> Stencil {
        let mut st = self.stencil(anchor, region);
        if let Some(c) = st.corner.get_mut(i) {
            *c += self.raw_term(i, p, region).1 - self.raw_term(i, anchor, region).1;
        }
        st
    }

    /// Recovered gradient at `p` on the side `region`.
    pub fn gradient(&self, u: &FemField, betas: &[f64], p: Vec2, region: Region) -> Vec2 {
        self.stencil(p, region).apply(u, betas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corner::Contrast;
    use crate::geometry::{generate_mesh, square, MeshOptions, OuterDomain, Polygon};

    #[test]
    fn quadratics_are_recovered_exactly() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let mesh = Arc::new(generate_mesh(&poly, &o, &MeshOptions::new(0.08).duplicated(true)).unwrap());
        let rec = GradientRecovery::new(&mesh, None);
        let f = |p: Vec2| 1.0 + 2.0 * p.x - p.y + 0.5 * p.x * p.x + 3.0 * p.x * p.y - p.y * p.y;
        let grad = |p: Vec2| Vec2::new(2.0 + p.x + 3.0 * p.y, -1.0 + 3.0 * p.x - 2.0 * p.y);
        let u = FemField::from_fn(&mesh, f);
        for (p, r) in [(Vec2::new(0.3, 0.1), Region::Inside), (Vec2::new(0.3, 0.1), Region::Outside), (Vec2::new(0.6, -0.2), Region::Outside)] {
            let g = rec.gradient(&u, &[], p, r);
            assert!((g - grad(p)).norm() < 1e-9, "{g:?}");
        }
    }

    #[test]
    fn corner_term_is_subtracted_and_restored() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let mesh = Arc::new(generate_mesh(&poly, &o, &MeshOptions::new(0.05).duplicated(true)).unwrap());
        let spec = CornerSpectrum::new(&poly, Contrast::Finite(2.0)).unwrap();
        let rec = GradientRecovery::new(&mesh, Some(&spec));
        let betas = [0.7, 0.0, -0.3, 0.0];
        // nodal values of the corner terms on each side plus a linear part
        let mut u = FemField::zeros(mesh.n_nodes());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &k in tri {
                let p = mesh.node(k);
                u.values_mut()[k] = p.x - 2.0 * p.y + rec.corner_sum(&betas, p, mesh.regions()[t]).0;
            }
        }
        let v = spec.vertex(0);
        for side in [Region::Inside, Region::Outside] {
            for r in [1e-3, 1e-2] {
                let th = if side == Region::Inside { 0.3 } else { 3.0 };
                let p = v.position + Vec2::polar(r, th + v.frame);
                let g = rec.gradient(&u, &betas, p, side);
                let want = Vec2::new(1.0, -2.0) + rec.corner_sum(&betas, p, side).1;
                assert!((g - want).norm() < 1e-9 * want.norm(), "{r} {g:?} {want:?}");
            }
        }
    }
}
