use super::{OuterDomain, Polygon, Vec2};
use crate::error::{Error, Result};

/// Vector field on the polygon boundary, affine on each edge and continuous at
/// the vertices. It is stored by its vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    values: Vec<Vec2>,
}

impl PerturbationField {
    pub fn from_vertex_values(values: Vec<Vec2>) -> Self {
        PerturbationField { values }
    }

    pub fn zero(n: usize) -> Self {
        PerturbationField { values: vec![Vec2::ZERO; n] }
    }

    /// Moves vertex `i` by `dir`, tapering linearly to zero along the adjacent edges.
    pub fn vertex_motion(n: usize, i: usize, dir: Vec2) -> Self {
        let mut values = vec![Vec2::ZERO; n];
        values[i] = dir;
        PerturbationField { values }
    }

    /// Unit motion of vertex `i` away from the barycenter.
    pub fn vertex_outward(poly: &Polygon, i: usize) -> Self {
        let d = poly.vertex(i) - poly.barycenter();
        Self::vertex_motion(poly.len(), i, d * (1.0 / d.norm()))
    }

    /// `h(x_i) = x_i - barycenter`: the generator of a dilation.
    pub fn dilation(poly: &Polygon) -> Self {
        let c = poly.barycenter();
        PerturbationField { values: poly.vertices().iter().map(|&p| p - c).collect() }
    }

    /// Both endpoints of edge `j` moved along that edge's outward normal, so the
    /// field equals the normal on the edge and tapers on its neighbours.
    pub fn edge_normal(poly: &Polygon, j: usize) -> Self {
        let n = poly.len();
        let mut values = vec![Vec2::ZERO; n];
        values[j] = poly.normal(j);
        values[(j + 1) % n] = poly.normal(j);
        PerturbationField { values }
    }

    /// The `2n` coordinate basis: entry `2i` moves vertex `i` in x, `2i + 1` in y.
    pub fn coordinate_basis(n: usize) -> Vec<Self> {
        (0..2 * n)
            .map(|c| {
                let dir = if c % 2 == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
                Self::vertex_motion(n, c / 2, dir)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vertex_values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn vertex_value(&self, i: usize) -> Vec2 {
        self.values[i % self.values.len()]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Vec2::ZERO)
    }

    /// Value on edge `j` at parameter `s` in `[0, 1]`.
    pub fn eval_edge(&self, j: usize, s: f64) -> Vec2 {
        self.vertex_value(j).lerp(self.vertex_value(j + 1), s)
    }

    /// `h . nu` on edge `j` at parameter `s`.
    pub fn normal_component(&self, poly: &Polygon, j: usize, s: f64) -> f64 {
        self.eval_edge(j, s).dot(poly.normal(j))
    }

    /// One-sided normal limits `(h_i^-, h_i^+)` at vertex `i`: the limit along the
    /// incoming edge and along the outgoing edge.
    pub fn normal_limits(&self, poly: &Polygon, i: usize) -> (f64, f64) {
        let n = poly.len();
        let h = self.vertex_value(i);
        (h.dot(poly.normal((i + n - 1) % n)), h.dot(poly.normal(i)))
    }

    /// `max_j (sup |h| + |d_tau h|)` over the edges.
    pub fn w1inf_norm(&self, poly: &Polygon) -> f64 {
        (0..poly.len())
            .map(|j| {
                let a = self.vertex_value(j);
                let b = self.vertex_value(j + 1);
                a.norm().max(b.norm()) + (b - a).norm() / poly.edge_length(j)
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, t: f64) -> Self {
        PerturbationField { values: self.values.iter().map(|&v| v * t).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        PerturbationField {
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| x * a + y * b).collect(),
        }
    }
}

/// The perturbed polygon `{x + t h(x)}`; its vertices are exactly `x_i + t h(x_i)`.
pub fn deform(poly: &Polygon, h: &PerturbationField, t: f64, outer: &OuterDomain) -> Result<Polygon> {
    if t == 0.0 {
        return Ok(poly.clone());
    }
    let v: Vec<Vec2> = poly.vertices().iter().enumerate().map(|(i, &p)| p + h.vertex_value(i) * t).collect();
    match Polygon::new(&v, outer) {
        Ok(p) => {
            // orientation flip would mean the loop turned inside out
            if p.vertices() != v.as_slice() {
                return Err(Error::DegeneratePerturbation("orientation reversed".into()));
            }
            Ok(p)
        }
        Err(e) => Err(Error::DegeneratePerturbation(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::square;
    use std::f64::consts::PI;

    fn sq() -> (Polygon, OuterDomain) {
        let o = OuterDomain::unit_disk();
        (Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap(), o)
    }

    #[test]
    fn normal_limits_follow_edges() {
        let (p, _) = sq();
        let h = PerturbationField::vertex_motion(4, 0, Vec2::new(-1.0, -1.0));
        // incoming edge 3 has normal (-1,0), outgoing edge 0 has (0,-1)
        assert_eq!(h.normal_limits(&p, 0), (1.0, 1.0));
        let e = PerturbationField::edge_normal(&p, 0);
        assert_eq!(e.normal_component(&p, 0, 0.37), 1.0);
        assert_eq!(e.normal_limits(&p, 1), (1.0, 0.0));
    }

    #[test]
    fn norm_of_vertex_motion() {
        let (p, _) = sq();
        let h = PerturbationField::vertex_motion(4, 2, Vec2::new(0.6, 0.0));
        assert!((h.w1inf_norm(&p) - (0.6 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn deform_identity_and_dilation() {
        let (p, o) = sq();
        let h = PerturbationField::dilation(&p);
        assert_eq!(deform(&p, &h, 0.0, &o).unwrap(), p);
        let q = deform(&p, &h, 0.1, &o).unwrap();
        for i in 0..4 {
            assert!((q.vertex(i) - p.vertex(i) * 1.1).norm() < 1e-15);
            assert_eq!(q.vertex(i), p.vertex(i) + h.vertex_value(i) * 0.1);
        }
    }

    #[test]
    fn deform_one_vertex_changes_three_angles() {
        let (p, o) = sq();
        let d = Vec2::new(1.0, 1.0).normalized();
        let h = PerturbationField::vertex_motion(4, 2, d);
        let q = deform(&p, &h, 0.05, &o).unwrap();
        let v = q.vertices();
        for i in 0..4 {
            let a = v[(i + 1) % 4] - v[i];
            let b = v[(i + 3) % 4] - v[i];
            let direct = a.cross(b).atan2(a.dot(b)).rem_euclid(2.0 * PI);
            assert!((direct - q.angle(i)).abs() < 1e-14);
        }
        assert!((q.angle(0) - PI / 2.0).abs() < 1e-14);
        for i in 1..4 {
            assert!((q.angle(i) - PI / 2.0).abs() > 1e-3);
        }
    }

    #[test]
    fn deform_rejects_collapse() {
        let (p, o) = sq();
        let h = PerturbationField::vertex_motion(4, 2, Vec2::new(-1.0, -1.0));
        assert!(matches!(deform(&p, &h, 0.6, &o), Err(Error::DegeneratePerturbation(_))));
    }
}
