use std::f64::consts::PI;

use super::{segment_distance, segments_intersect, OuterDomain, Vec2};
use crate::error::{Error, Result};

/// Collinearity tolerance on interior angles.
const ANGLE_TOL: f64 = 1e-12;

/// The inclusion: a simple counterclockwise polygon.
///
/// Edge `j` runs from vertex `j` to vertex `j + 1`. Vertex `i` therefore joins
/// its incoming edge `i - 1` and its outgoing edge `i`. Local polar angles at a
/// vertex are measured counterclockwise from the outgoing edge, so the inside
/// of the polygon is `0 < theta < alpha_i` and the incoming edge lies at
/// `theta = alpha_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    angles: Vec<f64>,
    frame: Vec<f64>,
    radii: Vec<f64>,
}

impl Polygon {
    /// Validates the loop, normalizes orientation and computes angles and
    /// cut-off radii. The cut-off radius of a vertex is 0.45 times the smallest
    /// of its adjacent edge lengths, its distance to non-adjacent edges and its
    /// distance to the outer boundary.
    pub fn new(vertices: &[Vec2], outer: &OuterDomain) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::TooFewVertices(n));
        }
        let mut v = vertices.to_vec();
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        for i in 0..n {
            if v[i].dist(v[(i + 1) % n]) == 0.0 {
                return Err(Error::SelfIntersection(i, (i + 1) % n));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return Err(Error::SelfIntersection(i, j));
                }
            }
        }
        let mut angles = Vec::with_capacity(n);
        let mut frame = Vec::with_capacity(n);
        for i in 0..n {
            let e_out = v[(i + 1) % n] - v[i];
            let e_in = v[(i + n - 1) % n] - v[i];
            let a = e_out.cross(e_in).atan2(e_out.dot(e_in)).rem_euclid(2.0 * PI);
            if (a - PI).abs() < ANGLE_TOL || a < ANGLE_TOL {
                return Err(Error::CollinearVertex(i));
            }
            angles.push(a);
            frame.push(e_out.angle());
        }
        for p in &v {
            if outer.inside_distance(*p) <= 0.0 {
                return Err(Error::NotInsideOuterDomain);
            }
        }
        let mut radii = Vec::with_capacity(n);
        for i in 0..n {
            let mut m = outer.inside_distance(v[i]);
            m = m.min(v[i].dist(v[(i + 1) % n])).min(v[i].dist(v[(i + n - 1) % n]));
            for j in 0..n {
                if j == i || (j + 1) % n == i {
                    continue;
                }
                m = m.min(segment_distance(v[i], v[j], v[(j + 1) % n]).0);
            }
            radii.push(0.45 * m);
        }
        Ok(Polygon { vertices: v, angles, frame, radii })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i % self.len()]
    }

    /// Interior angle at vertex `i`.
    pub fn angle(&self, i: usize) -> f64 {
        self.angles[i]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Direction angle of the outgoing edge at vertex `i` (the local `theta = 0` ray).
    pub fn frame_angle(&self, i: usize) -> f64 {
        self.frame[i]
    }

    /// Cut-off radius of vertex `i`.
    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Endpoints of edge `j`.
    pub fn edge(&self, j: usize) -> (Vec2, Vec2) {
        (self.vertex(j), self.vertex(j + 1))
    }

    pub fn edge_length(&self, j: usize) -> f64 {
        let (a, b) = self.edge(j);
        a.dist(b)
    }

    /// Unit tangent of edge `j`, pointing along the counterclockwise traversal.
    pub fn tangent(&self, j: usize) -> Vec2 {
        let (a, b) = self.edge(j);
        (b - a).normalized()
    }

    /// Outward unit normal of edge `j`.
    pub fn normal(&self, j: usize) -> Vec2 {
        let t = self.tangent(j);
        Vec2::new(t.y, -t.x)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len()).map(|j| self.edge_length(j)).sum()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn barycenter(&self) -> Vec2 {
        let n = self.len() as f64;
        self.vertices.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / n)
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.len();
        let mut inside = false;
        for j in 0..n {
            let a = self.vertices[j];
            let b = self.vertices[(j + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary, with the closest edge and
    /// its parameter.
    pub fn boundary_distance(&self, p: Vec2) -> (f64, usize, f64) {
        let mut best = (f64::INFINITY, 0, 0.0);
        for j in 0..self.len() {
            let (a, b) = self.edge(j);
            let (d, s) = segment_distance(p, a, b);
            if d < best.0 {
                best = (d, j, s);
            }
        }
        best
    }

    /// Local polar coordinates `(r, theta)` of `p` about vertex `i`, `theta` in `[0, 2 pi)`.
    pub fn local_polar(&self, i: usize, p: Vec2) -> (f64, f64) {
        let d = p - self.vertices[i];
        (d.norm(), (d.angle() - self.frame[i]).rem_euclid(2.0 * PI))
    }

    /// Point at local polar coordinates about vertex `i`.
    pub fn from_local_polar(&self, i: usize, r: f64, theta: f64) -> Vec2 {
        self.vertices[i] + Vec2::polar(r, theta + self.frame[i])
    }

    /// Same polygon with a different vertex list, keeping the cut-off radii
    /// recomputed against `outer`.
    pub fn with_vertices(&self, v: &[Vec2], outer: &OuterDomain) -> Result<Self> {
        Polygon::new(v, outer)
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Regular `n`-gon centred at `c` whose area equals the disk of radius `rho`.
pub fn equal_area_ngon(c: Vec2, rho: f64, n: usize) -> Vec<Vec2> {
    let t = 2.0 * PI / n as f64;
    let big = rho * (2.0 * PI / (n as f64 * t.sin())).sqrt();
    (0..n).map(|j| c + Vec2::polar(big, t * j as f64)).collect()
}

/// Axis-aligned square with the given centre and half side, counterclockwise
/// from the lower-left corner.
pub fn square(c: Vec2, half: f64) -> Vec<Vec2> {
    vec![
        c + Vec2::new(-half, -half),
        c + Vec2::new(half, -half),
        c + Vec2::new(half, half),
        c + Vec2::new(-half, half),
    ]
}
