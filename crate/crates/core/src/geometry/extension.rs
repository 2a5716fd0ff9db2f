use super::{OuterDomain, PerturbationField, Polygon, Vec2};
use crate::error::{Error, Result};

/// Samples per direction when estimating sup norms on a quadrangle.
const SAMPLES: usize = 64;

/// One buffer quadrangle. `c = 1` on the polygon edge, `c = 0` on the buffer
/// edge; `d` runs from vertex `j` to vertex `j + 1`.
#[derive(Debug, Clone, Copy)]
struct Quad {
    edge: usize,
    a: Vec2,
    b: Vec2,
    ya: Vec2,
    yb: Vec2,
    lo: Vec2,
    hi: Vec2,
}

impl Quad {
    fn new(edge: usize, a: Vec2, b: Vec2, ya: Vec2, yb: Vec2) -> Self {
        let xs = [a.x, b.x, ya.x, yb.x];
        let ys = [a.y, b.y, ya.y, yb.y];
        let f = |v: &[f64], m: fn(f64, f64) -> f64, s| v.iter().copied().fold(s, m);
        Quad {
            edge,
            a,
            b,
            ya,
            yb,
            lo: Vec2::new(f(&xs, f64::min, f64::INFINITY), f(&ys, f64::min, f64::INFINITY)),
            hi: Vec2::new(f(&xs, f64::max, f64::NEG_INFINITY), f(&ys, f64::max, f64::NEG_INFINITY)),
        }
    }

    fn map(&self, c: f64, d: f64) -> Vec2 {
        (self.a * (1.0 - d) + self.b * d) * c + (self.ya * (1.0 - d) + self.yb * d) * (1.0 - c)
    }

    /// Columns `dx/dc`, `dx/dd`.
    fn jac(&self, c: f64, d: f64) -> (Vec2, Vec2) {
        let dc = (self.a * (1.0 - d) + self.b * d) - (self.ya * (1.0 - d) + self.yb * d);
        let dd = (self.b - self.a) * c + (self.yb - self.ya) * (1.0 - c);
        (dc, dd)
    }

    fn corners(&self) -> [Vec2; 4] {
        [self.a, self.b, self.yb, self.ya]
    }

    fn is_convex(&self) -> bool {
        let c = self.corners();
        let s: Vec<f64> = (0..4).map(|k| (c[(k + 1) % 4] - c[k]).cross(c[(k + 2) % 4] - c[(k + 1) % 4])).collect();
        s.iter().all(|&x| x > 0.0) || s.iter().all(|&x| x < 0.0)
    }

    fn contains(&self, p: Vec2) -> bool {
        if p.x < self.lo.x || p.x > self.hi.x || p.y < self.lo.y || p.y > self.hi.y {
            return false;
        }
        let c = self.corners();
        let s: Vec<f64> = (0..4).map(|k| (c[(k + 1) % 4] - c[k]).cross(p - c[k])).collect();
        let tol = 1e-14 * (self.hi - self.lo).norm2();
        s.iter().all(|&x| x >= -tol) || s.iter().all(|&x| x <= tol)
    }

    /// Newton inversion of the bilinear map; converges from the centre for convex quads.
    fn invert(&self, p: Vec2) -> (f64, f64) {
        let (mut c, mut d) = (0.5, 0.5);
        for _ in 0..30 {
            let r = self.map(c, d) - p;
            let (jc, jd) = self.jac(c, d);
            let det = jc.cross(jd);
            let dc = (r.cross(jd)) / det;
            let dd = (jc.cross(r)) / det;
            c -= dc;
            d -= dd;
            if dc.abs() + dd.abs() < 1e-15 {
                break;
            }
        }
        (c.clamp(0.0, 1.0), d.clamp(0.0, 1.0))
    }
}

/// Extension `H` of a perturbation field `h` to the whole domain, built from
/// bilinear interpolation on quadrangles between the polygon and an inner and an
/// outer buffer polygon. `H` vanishes inside the inner buffer and outside the
/// outer one.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    inner: Vec<Vec2>,
    outer: Vec<Vec2>,
    quads: Vec<Quad>,
    values: Vec<Vec2>,
    offset: f64,
    h_norm: f64,
    norm: f64,
}

/// Offset vertex of a uniform parallel offset at distance `d`, towards the
/// inside (`sign = 1`) or the outside (`sign = -1`).
fn offset_vertex(poly: &Polygon, i: usize, d: f64, sign: f64) -> Vec2 {
    let a = poly.angle(i);
    let bis = Vec2::polar(1.0, poly.frame_angle(i) + 0.5 * a);
    poly.vertex(i) + bis * (sign * d / (0.5 * a).sin())
}

fn simple_ccw(v: &[Vec2]) -> bool {
    let n = v.len();
    let area: f64 = (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum();
    if area <= 0.0 {
        return false;
    }
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if super::segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

impl ExtensionField {
    /// Builds the extension. The buffer distance starts at 40% of the smallest
    /// cut-off radius and shrinks until every quadrangle is convex, the inner
    /// buffer is a simple loop and the outer buffer keeps clear of the body
    /// boundary.
    pub fn new(h: &PerturbationField, poly: &Polygon, omega: &OuterDomain) -> Result<Self> {
        let rmin = poly.radii().iter().copied().fold(f64::INFINITY, f64::min);
        let mut d = 0.4 * rmin;
        let mut last = Error::ClearanceTooSmall;
        for _ in 0..12 {
            match Self::try_build(h, poly, omega, d) {
                Ok(e) => return Ok(e),
                Err(e) => last = e,
            }
            d *= 0.7;
        }
        Err(last)
    }

    fn try_build(h: &PerturbationField, poly: &Polygon, omega: &OuterDomain, d: f64) -> Result<Self> {
        let n = poly.len();
        let inner: Vec<Vec2> = (0..n).map(|i| offset_vertex(poly, i, d, 1.0)).collect();
        let outer: Vec<Vec2> = (0..n).map(|i| offset_vertex(poly, i, d, -1.0)).collect();
        if !simple_ccw(&inner) || !simple_ccw(&outer) {
            return Err(Error::ClearanceTooSmall);
        }
        for p in &outer {
            if omega.inside_distance(*p) < d {
                return Err(Error::ClearanceTooSmall);
            }
        }
        let mut quads = Vec::with_capacity(2 * n);
        for j in 0..n {
            let (a, b) = poly.edge(j);
            let q = Quad::new(j, a, b, inner[j], inner[(j + 1) % n]);
            if !q.is_convex() {
                return Err(Error::NonconvexQuadrangle(j));
            }
            quads.push(q);
        }
        for j in 0..n {
            let (a, b) = poly.edge(j);
            let q = Quad::new(j, a, b, outer[j], outer[(j + 1) % n]);
            if !q.is_convex() {
                return Err(Error::NonconvexQuadrangle(j));
            }
            quads.push(q);
        }
        let mut e = ExtensionField {
            inner,
            outer,
            quads,
            values: h.vertex_values().to_vec(),
            offset: d,
            h_norm: h.w1inf_norm(poly),
            norm: 0.0,
        };
        e.norm = e.sampled_norm();
        Ok(e)
    }

    fn quad_value(&self, q: &Quad, c: f64, d: f64) -> (Vec2, [[f64; 2]; 2]) {
        let n = self.values.len();
        let ha = self.values[q.edge];
        let hb = self.values[(q.edge + 1) % n];
        let edge_val = ha * (1.0 - d) + hb * d;
        let val = edge_val * c;
        // dH/dc and dH/dd, then chain rule through the inverse Jacobian
        let hc = edge_val;
        let hd = (hb - ha) * c;
        let (jc, jd) = q.jac(c, d);
        let det = jc.cross(jd);
        // inverse of [jc jd] is (1/det) [[jd.y, -jd.x], [-jc.y, jc.x]]
        let dc_dx = Vec2::new(jd.y, -jd.x) * (1.0 / det);
        let dd_dx = Vec2::new(-jc.y, jc.x) * (1.0 / det);
        let grad = [
            [hc.x * dc_dx.x + hd.x * dd_dx.x, hc.x * dc_dx.y + hd.x * dd_dx.y],
            [hc.y * dc_dx.x + hd.y * dd_dx.x, hc.y * dc_dx.y + hd.y * dd_dx.y],
        ];
        (val, grad)
    }

    /// `H(p)` and its Jacobian `DH(p)` (row = component).
    pub fn eval_with_jacobian(&self, p: Vec2) -> (Vec2, [[f64; 2]; 2]) {
        for q in &self.quads {
            if q.contains(p) {
                let (c, d) = q.invert(p);
                return self.quad_value(q, c, d);
            }
        }
        (Vec2::ZERO, [[0.0; 2]; 2])
    }

    pub fn eval(&self, p: Vec2) -> Vec2 {
        self.eval_with_jacobian(p).0
    }

    pub fn inner_buffer(&self) -> &[Vec2] {
        &self.inner
    }

    pub fn outer_buffer(&self) -> &[Vec2] {
        &self.outer
    }

    /// Buffer offset distance actually used.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `sup |H| + sup |DH|` (spectral norm) from dense sampling of every quadrangle.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Realized ratio `||H|| / ||h||`; `None` for the zero field.
    pub fn realized_constant(&self) -> Option<f64> {
        (self.h_norm > 0.0).then(|| self.norm / self.h_norm)
    }

    /// True when `p` may have `H(p) != 0`.
    pub fn in_support(&self, p: Vec2) -> bool {
        self.quads.iter().any(|q| q.contains(p))
    }

    fn sampled_norm(&self) -> f64 {
        let mut sup_v: f64 = 0.0;
        let mut sup_d: f64 = 0.0;
        for q in &self.quads {
            for ic in 0..=SAMPLES {
                for id in 0..=SAMPLES {
                    let c = ic as f64 / SAMPLES as f64;
                    let d = id as f64 / SAMPLES as f64;
                    let (v, g) = self.quad_value(q, c, d);
                    sup_v = sup_v.max(v.norm());
                    sup_d = sup_d.max(spectral_norm(&g));
                }
            }
        }
        sup_v + sup_d
    }
}

pub(crate) fn spectral_norm(m: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}
