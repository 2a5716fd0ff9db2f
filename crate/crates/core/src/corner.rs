//! Angular eigenproblem at a polygon vertex: exponents, eigenfunctions, and the
//! singular functions enriching the shape-derivative transmission problem.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Region, Vec2};
use crate::quadrature::{gauss_legendre, push_mapped};

/// Conductivity contrast of the inclusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contrast {
    /// Finite `k > 0`, `k != 1`.
    Finite(f64),
    /// `k = 0`: homogeneous Neumann condition on the inclusion boundary.
    Insulating,
    /// `k = infinity`: grounded inclusion.
    Conducting,
    /// `k = 1`, only for testing against the homogeneous medium.
    Unity,
}

impl Contrast {
    pub fn finite(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidContrast(format!("k = {k} must be positive")));
        }
        if (k - 1.0).abs() <= 1e-10 {
            return Err(Error::ContrastUnity);
        }
        Ok(Contrast::Finite(k))
    }

    /// Conductivity value inside the inclusion, when it is a number.
    pub fn k(self) -> Option<f64> {
        match self {
            Contrast::Finite(k) => Some(k),
            Contrast::Unity => Some(1.0),
            _ => None,
        }
    }

    /// `|(k + 1) / (k - 1)|`.
    pub fn lambda(self) -> Option<f64> {
        match self {
            Contrast::Finite(k) => Some(((k + 1.0) / (k - 1.0)).abs()),
            _ => None,
        }
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, Contrast::Insulating | Contrast::Conducting)
    }

    /// Conductivity in a region; zero inside a degenerate inclusion (the region
    /// is excluded from such solves).
    pub fn sigma(self, region: Region) -> f64 {
        match region {
            Region::Outside => 1.0,
            Region::Inside => self.k().unwrap_or(0.0),
        }
    }

    pub fn label(self) -> String {
        match self {
            Contrast::Finite(k) => format!("k={k}"),
            Contrast::Insulating => "insulating".into(),
            Contrast::Conducting => "conducting".into(),
            Contrast::Unity => "k=1".into(),
        }
    }
}

fn check_angle(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0 * PI) || (alpha - PI).abs() < 1e-12 {
        return Err(Error::InvalidAngle(alpha));
    }
    Ok(())
}

/// `|sin gamma (alpha - pi)| - lambda |sin gamma pi|`.
pub fn exponent_residual(gamma: f64, alpha: f64, lambda: f64) -> f64 {
    (gamma * (alpha - PI)).sin().abs() - lambda * (gamma * PI).sin().abs()
}

/// The first `count` nonnegative exponents in increasing order, starting with 0.
pub fn gamma_roots(alpha: f64, contrast: Contrast, count: usize) -> Result<Vec<f64>> {
    check_angle(alpha)?;
    match contrast {
        Contrast::Unity => Err(Error::ContrastUnity),
        Contrast::Insulating | Contrast::Conducting => {
            Ok((0..count).map(|j| j as f64 * PI / (2.0 * PI - alpha)).collect())
        }
        Contrast::Finite(k) => {
            Contrast::finite(k)?;
            let lambda = contrast.lambda().unwrap();
            let f = |g: f64| exponent_residual(g, alpha, lambda);
            let mut roots = vec![0.0];
            let mut upper = 3.0;
            while roots.len() < count {
                roots.truncate(1);
                // |sin gamma pi| has cusps at the integers; pairs of roots can
                // hug them closer than the grid spacing
                let touching = |m: usize| ((m as f64) * (alpha - PI)).sin().abs() < 1e-12;
                let steps = (2000.0 * upper / 3.0) as usize;
                let mut grid: Vec<f64> = (1..=steps).map(|j| upper * j as f64 / steps as f64).collect();
                grid.extend((1..upper as usize).filter(|&m| !touching(m)).map(|m| m as f64));
                grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
                grid.dedup();
                let mut prev = f(grid[0]);
                for w in grid.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let fb = f(b);
                    if prev == 0.0 {
                        roots.push(a);
                    } else if prev * fb < 0.0 {
                        roots.push(bisect(&f, a, b, prev));
                    }
                    prev = fb;
                }
                for m in 2..=(upper as usize) {
                    let g = m as f64;
                    if touching(m) && !roots.iter().any(|r| (r - g).abs() < 1e-9) {
                        roots.push(g);
                    }
                }
                roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
                upper *= 2.0;
            }
            roots.truncate(count);
            Ok(roots)
        }
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Coefficient matrix of the angular transmission system for
/// `(A^-, B^-, A^+, B^+)`: periodicity of value and flux at `theta = 0 / 2 pi`
/// and continuity of value and flux at `theta = alpha`.
pub fn eigen_matrix(gamma: f64, alpha: f64, k: f64) -> Matrix4<f64> {
    let (s2, c2) = (2.0 * PI * gamma).sin_cos();
    let (sa, ca) = (gamma * alpha).sin_cos();
    Matrix4::new(
        1.0, 0.0, -c2, -s2, //
        0.0, k, s2, -c2, //
        ca, sa, -ca, -sa, //
        -k * sa, k * ca, sa, -ca,
    )
}

/// Determinant after scaling every row to unit Euclidean norm.
pub fn normalized_det(m: &Matrix4<f64>) -> f64 {
    let mut n = *m;
    for r in 0..4 {
        let s = n.row(r).norm();
        if s > 0.0 {
            n.row_mut(r).scale_mut(1.0 / s);
        }
    }
    n.determinant()
}

/// Numerical rank with relative singular-value threshold `tol`.
pub fn rank(m: &Matrix4<f64>, tol: f64) -> usize {
    let s = m.singular_values();
    let top = s.max();
    s.iter().filter(|&&x| x > tol * top).count()
}

/// Angular profile with coefficients `(A^-, B^-, A^+, B^+)`: the first pair
/// applies on `[0, alpha]`, the second on `[alpha, 2 pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub gamma: f64,
    pub alpha: f64,
    pub coeffs: [f64; 4],
}

impl Profile {
    fn pair(&self, region: Region) -> (f64, f64) {
        match region {
            Region::Inside => (self.coeffs[0], self.coeffs[1]),
            Region::Outside => (self.coeffs[2], self.coeffs[3]),
        }
    }

    /// Value and angular derivative on the branch of `region`.
    pub fn eval(&self, theta: f64, region: Region) -> (f64, f64) {
        let (a, b) = self.pair(region);
        let (s, c) = (self.gamma * theta).sin_cos();
        (a * c + b * s, self.gamma * (b * c - a * s))
    }

    /// Second angular derivative.
    pub fn eval2(&self, theta: f64, region: Region) -> f64 {
        -self.gamma * self.gamma * self.eval(theta, region).0
    }

    /// Value by the natural branch of `theta` in `[0, 2 pi]`.
    pub fn at(&self, theta: f64) -> f64 {
        let r = if theta <= self.alpha { Region::Inside } else { Region::Outside };
        self.eval(theta, r).0
    }

    /// `int (a cos + b sin)` over `[t0, t1]`.
    fn int_lin(&self, a: f64, b: f64, t0: f64, t1: f64) -> f64 {
        let g = self.gamma;
        if g == 0.0 {
            return a * (t1 - t0);
        }
        let prim = |t: f64| (a * (g * t).sin() - b * (g * t).cos()) / g;
        prim(t1) - prim(t0)
    }

    /// `k int_0^alpha y + int_alpha^{2 pi} y`, with `k` the inside weight.
    pub fn weighted_integral(&self, k: f64) -> f64 {
        let [am, bm, ap, bp] = self.coeffs;
        k * self.int_lin(am, bm, 0.0, self.alpha) + self.int_lin(ap, bp, self.alpha, 2.0 * PI)
    }

    /// `int (a cos + b sin)^2` over `[t0, t1]`.
    fn int_sq(&self, a: f64, b: f64, t0: f64, t1: f64) -> f64 {
        let g = self.gamma;
        if g == 0.0 {
            return a * a * (t1 - t0);
        }
        let prim = |t: f64| {
            let s2 = (2.0 * g * t).sin();
            let s = (g * t).sin();
            a * a * (t / 2.0 + s2 / (4.0 * g)) + b * b * (t / 2.0 - s2 / (4.0 * g)) + a * b * s * s / g
        };
        prim(t1) - prim(t0)
    }

    /// Weighted squared norm: weight `k` on `(0, alpha)`, 1 on `(alpha, 2 pi)`.
    pub fn weighted_norm2(&self, k: f64) -> f64 {
        let [am, bm, ap, bp] = self.coeffs;
        k * self.int_sq(am, bm, 0.0, self.alpha) + self.int_sq(ap, bp, self.alpha, 2.0 * PI)
    }
}

/// Normalized eigenfunction coefficients `(A^-, B^-, A^+, B^+)` of index `j`.
pub fn eigenfunction(alpha: f64, contrast: Contrast, j: usize) -> Result<[f64; 4]> {
    let gammas = gamma_roots(alpha, contrast, j + 1)?;
    let g = gammas[j];
    match contrast {
        Contrast::Insulating => {
            if j == 0 {
                let c = 1.0 / (2.0 * PI - alpha).sqrt();
                return Ok([0.0, 0.0, c, 0.0]);
            }
            let c = (2.0 / (2.0 * PI - alpha)).sqrt();
            Ok([0.0, 0.0, c * (g * alpha).cos(), c * (g * alpha).sin()])
        }
        Contrast::Conducting => {
            if j == 0 {
                return Err(Error::NotAnEigenvalue(0.0));
            }
            let c = (2.0 / (2.0 * PI - alpha)).sqrt();
            Ok([0.0, 0.0, -c * (g * alpha).sin(), c * (g * alpha).cos()])
        }
        Contrast::Unity => Err(Error::ContrastUnity),
        Contrast::Finite(k) => {
            if j == 0 {
                let c = 1.0 / (k * alpha + 2.0 * PI - alpha).sqrt();
                return Ok([c, 0.0, c, 0.0]);
            }
            finite_eigenvector(g, alpha, k)
        }
    }
}

fn finite_eigenvector(g: f64, alpha: f64, k: f64) -> Result<[f64; 4]> {
    let y = eigen_matrix(g, alpha, k);
    let svd = y.svd(false, true);
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap());
    let top = s.max();
    if s[order[0]] > 1e-8 * top {
        return Err(Error::NotAnEigenvalue(g));
    }
    if s[order[1]] < 1e-8 * top {
        return Err(Error::DegenerateEigenspace(g));
    }
    let vt = svd.v_t.unwrap();
    let row = vt.row(order[0]);
    let mut c = [row[0], row[1], row[2], row[3]];
    let p = Profile { gamma: g, alpha, coeffs: c };
    let n = p.weighted_norm2(k).sqrt();
    let sign = if c[0].abs() > 1e-12 { c[0].signum() } else { c[1].signum() };
    for x in &mut c {
        *x *= sign / n;
    }
    Ok(c)
}

/// Exponents and eigenfunctions at one vertex, with the vertex geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSpectrum {
    pub position: Vec2,
    pub frame: f64,
    pub alpha: f64,
    pub radius: f64,
    /// `gamma_0 = 0, gamma_1, gamma_2`.
    pub gamma: [f64; 3],
    pub y1: [f64; 4],
    /// `None` when the second eigenspace is two-dimensional.
    pub y2: Option<[f64; 4]>,
}

impl VertexSpectrum {
    pub fn profile1(&self) -> Profile {
        Profile { gamma: self.gamma[1], alpha: self.alpha, coeffs: self.y1 }
    }

    pub fn profile2(&self) -> Option<Profile> {
        self.y2.map(|c| Profile { gamma: self.gamma[2], alpha: self.alpha, coeffs: c })
    }

    /// `cos(gamma_1 alpha)`, `sin(gamma_1 alpha)`.
    pub fn cs1(&self) -> (f64, f64) {
        let (s, c) = (self.gamma[1] * self.alpha).sin_cos();
        (c, s)
    }

    /// Local polar coordinates of `p`, with `theta` on the branch of `region`:
    /// inside values live near `[0, alpha]`, outside values near `[alpha, 2 pi]`.
    pub fn polar(&self, p: Vec2, region: Region) -> (f64, f64) {
        let d = p - self.position;
        let t = (d.angle() - self.frame).rem_euclid(2.0 * PI);
        let theta = match region {
            Region::Inside if t > 0.5 * (self.alpha + 2.0 * PI) => t - 2.0 * PI,
            Region::Outside if t < 0.5 * self.alpha => t + 2.0 * PI,
            _ => t,
        };
        (d.norm(), theta)
    }

    /// Unit radial and angular directions at local angle `theta`.
    pub fn frame_vectors(&self, theta: f64) -> (Vec2, Vec2) {
        let phi = theta + self.frame;
        (Vec2::polar(1.0, phi), Vec2::polar(1.0, phi + PI / 2.0))
    }

    /// `beta * y_1(theta) r^gamma_1` and its gradient.
    pub fn leading_term(&self, beta: f64, p: Vec2, region: Region) -> (f64, Vec2) {
        let (r, th) = self.polar(p, region);
        let g = self.gamma[1];
        let (y, dy) = self.profile1().eval(th, region);
        if r == 0.0 {
            return (0.0, Vec2::ZERO);
        }
        let (er, et) = self.frame_vectors(th);
        let rg = r.powf(g);
        (beta * y * rg, (er * (g * y) + et * dy) * (beta * rg / r))
    }
}

/// Spectra for every vertex of a polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSpectrum {
    pub contrast: Contrast,
    pub vertices: Vec<VertexSpectrum>,
}

impl CornerSpectrum {
    pub fn new(poly: &Polygon, contrast: Contrast) -> Result<Self> {
        let mut vertices = Vec::with_capacity(poly.len());
        for i in 0..poly.len() {
            let alpha = poly.angle(i);
            let g = gamma_roots(alpha, contrast, 3)?;
            let y1 = eigenfunction(alpha, contrast, 1)?;
            let y2 = match eigenfunction(alpha, contrast, 2) {
                Ok(c) => Some(c),
                Err(Error::DegenerateEigenspace(_)) => None,
                Err(e) => return Err(e),
            };
            vertices.push(VertexSpectrum {
                position: poly.vertex(i),
                frame: poly.frame_angle(i),
                alpha,
                radius: poly.radius(i),
                gamma: [g[0], g[1], g[2]],
                y1,
                y2,
            });
        }
        Ok(CornerSpectrum { contrast, vertices })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &VertexSpectrum {
        &self.vertices[i]
    }
}

/// Radial cut-off: 1 for `r <= 0.4 R`, 0 for `r >= R`, quintic smoothstep in
/// between. Returns `(chi, chi', chi'')`.
pub fn cutoff(r: f64, radius: f64) -> (f64, f64, f64) {
    let a = 0.4 * radius;
    if r <= a {
        return (1.0, 0.0, 0.0);
    }
    if r >= radius {
        return (0.0, 0.0, 0.0);
    }
    let w = radius - a;
    let t = (r - a) / w;
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (1.0 - s, -ds / w, -dds / (w * w))
}

/// Singular function `w_i = chi_i(r) y~_i(theta) r^(gamma_1 - 1)` at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularFunction {
    pub vertex: usize,
    pub spectrum: VertexSpectrum,
    pub k: f64,
    pub beta: f64,
    pub h_minus: f64,
    pub h_plus: f64,
    /// `(A'^-, B'^-, A'^+, B'^+)`.
    pub coeffs: [f64; 4],
}

/// Solves for the singular function whose jumps reproduce the leading-order
/// transmission data at vertex `i`. The right-hand side carries the leading
/// forward coefficient `beta`.
pub fn singular_coefficients(
    i: usize,
    spectrum: &CornerSpectrum,
    beta: f64,
    h_minus: f64,
    h_plus: f64,
    contrast: Contrast,
) -> Result<SingularFunction> {
    let Contrast::Finite(k) = contrast else {
        return Err(Error::UnsupportedContrast(contrast.label()));
    };
    let v = spectrum.vertex(i).clone();
    let g = v.gamma[1];
    let [am, bm, _, _] = v.y1;
    let (c, s) = v.cs1();
    let scale = beta * (1.0 - k) * g;
    let rhs = Vector4::new(h_plus * bm, h_plus * am, h_minus * (am * s - bm * c), -h_minus * (am * c + bm * s)) * scale;
    let y = eigen_matrix(g - 1.0, v.alpha, k);
    let coeffs = if rhs.iter().all(|&x| x == 0.0) {
        [0.0; 4]
    } else {
        let lu = y.lu();
        let sol = lu.solve(&rhs).ok_or(Error::SingularSystem(i))?;
        let res = (y * sol - rhs).amax();
        if !(res <= 1e-10 * rhs.amax().max(1e-300)) {
            return Err(Error::SingularSystem(i));
        }
        [sol[0], sol[1], sol[2], sol[3]]
    };
    Ok(SingularFunction { vertex: i, spectrum: v, k, beta, h_minus, h_plus, coeffs })
}

impl SingularFunction {
    pub fn profile(&self) -> Profile {
        Profile { gamma: self.spectrum.gamma[1] - 1.0, alpha: self.spectrum.alpha, coeffs: self.coeffs }
    }

    pub fn exponent(&self) -> f64 {
        self.spectrum.gamma[1] - 1.0
    }

    pub fn radius(&self) -> f64 {
        self.spectrum.radius
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Value and gradient on the branch of `region`.
    pub fn eval(&self, p: Vec2, region: Region) -> (f64, Vec2) {
        let (r, th) = self.spectrum.polar(p, region);
        if r >= self.radius() || r == 0.0 || self.is_zero() {
            return (0.0, Vec2::ZERO);
        }
        let gp = self.exponent();
        let (chi, dchi, _) = cutoff(r, self.radius());
        let (y, dy) = self.profile().eval(th, region);
        let rg = r.powf(gp);
        let (er, et) = self.spectrum.frame_vectors(th);
        let dr = dchi * y * rg + chi * y * gp * rg / r;
        let dt = chi * dy * rg / r;
        (chi * y * rg, er * dr + et * dt)
    }

    /// Volume source `sigma * Laplacian(w_i)`, supported in `0.4 R < r < R`.
    pub fn source(&self, p: Vec2, region: Region) -> f64 {
        let (r, th) = self.spectrum.polar(p, region);
        let big = self.radius();
        if r <= 0.4 * big || r >= big {
            return 0.0;
        }
        let sigma = match region {
            Region::Inside => self.k,
            Region::Outside => 1.0,
        };
        let gp = self.exponent();
        let (_, d1, d2) = cutoff(r, big);
        let y = self.profile().eval(th, region).0;
        sigma * y * (2.0 * d1 * gp * r.powf(gp - 1.0) + r.powf(gp) * (d2 + d1 / r))
    }

    /// `int sigma Laplacian(w_i) dx` over the cut-off annulus.
    pub fn source_integral(&self) -> f64 {
        let big = self.radius();
        let gp = self.exponent();
        let rule = gauss_legendre(16);
        let mut nodes = Vec::new();
        for k in 0..8 {
            let a = 0.4 * big + 0.6 * big * k as f64 / 8.0;
            let b = 0.4 * big + 0.6 * big * (k + 1) as f64 / 8.0;
            push_mapped(&rule, a, b, &mut nodes);
        }
        let radial: f64 = nodes
            .iter()
            .map(|&(r, w)| {
                let (_, d1, d2) = cutoff(r, big);
                w * r * (2.0 * d1 * gp * r.powf(gp - 1.0) + r.powf(gp) * (d2 + d1 / r))
            })
            .sum();
        self.profile().weighted_integral(self.k) * radial
    }

    /// Jump `w^+ - w^-` on the outgoing edge (`side = 0`) or the incoming edge
    /// (`side = 1`) at distance `r` from the vertex.
    pub fn jump(&self, r: f64, side: usize) -> f64 {
        if r >= self.radius() || self.is_zero() {
            return 0.0;
        }
        let p = self.profile();
        let a = self.spectrum.alpha;
        let (plus, minus) = if side == 0 {
            (p.eval(2.0 * PI, Region::Outside).0, p.eval(0.0, Region::Inside).0)
        } else {
            (p.eval(a, Region::Outside).0, p.eval(a, Region::Inside).0)
        };
        cutoff(r, self.radius()).0 * r.powf(self.exponent()) * (plus - minus)
    }

    /// Flux jump `d_nu w^+ - k d_nu w^-` on an edge at distance `r`.
    pub fn flux_jump(&self, r: f64, side: usize) -> f64 {
        if r >= self.radius() || self.is_zero() {
            return 0.0;
        }
        let p = self.profile();
        let a = self.spectrum.alpha;
        let scale = cutoff(r, self.radius()).0 * r.powf(self.exponent() - 1.0);
        // d_nu = -(1/r) d_theta on the outgoing edge, +(1/r) d_theta on the incoming edge
        if side == 0 {
            -scale * (p.eval(2.0 * PI, Region::Outside).1 - self.k * p.eval(0.0, Region::Inside).1)
        } else {
            scale * (p.eval(a, Region::Outside).1 - self.k * p.eval(a, Region::Inside).1)
        }
    }
}

/// Residual of the integral identity tying the singular profile to the data:
/// `(gamma_1 - 1)(k int_0^alpha y~ + int_alpha^{2 pi} y~) = beta (1 - k) gamma_1 (h^+ A^- + h^- (A^- c + B^- s))`.
pub fn integral_identity_check(sf: &SingularFunction) -> f64 {
    let v = &sf.spectrum;
    let g = v.gamma[1];
    let (c, s) = v.cs1();
    let [am, bm, _, _] = v.y1;
    let lhs = (g - 1.0) * sf.profile().weighted_integral(sf.k);
    let rhs = sf.beta * (1.0 - sf.k) * g * (sf.h_plus * am + sf.h_minus * (am * c + bm * s));
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{square, OuterDomain};
    use proptest::prelude::*;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let rule = gauss_legendre(20);
        let mut nodes = Vec::new();
        for k in 0..50 {
            push_mapped(&rule, a + (b - a) * k as f64 / 50.0, a + (b - a) * (k + 1) as f64 / 50.0, &mut nodes);
        }
        nodes.iter().map(|&(x, w)| w * f(x)).sum()
    }

    #[test]
    fn right_angle_k2_closed_form() {
        let g = gamma_roots(PI / 2.0, Contrast::Finite(2.0), 3).unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 2.0 / PI * (1.0f64 / 6.0).acos()).abs() < 1e-10);
        assert!((g[2] - 2.0 / PI * (-1.0f64 / 6.0).acos()).abs() < 1e-10);
        let r = gamma_roots(3.0 * PI / 2.0, Contrast::Finite(2.0), 3).unwrap();
        assert!((r[1] - g[1]).abs() < 1e-14);
    }

    #[test]
    fn degenerate_exponents() {
        let g = gamma_roots(PI / 2.0, Contrast::Insulating, 3).unwrap();
        assert_eq!(g[1], PI / (1.5 * PI));
        assert!((g[1] - 2.0 / 3.0).abs() < 1e-15);
        // the finite equation with lambda = 1 is satisfied by 2/3 at a right angle
        assert!(exponent_residual(2.0 / 3.0, PI / 2.0, 1.0).abs() < 1e-15);
        assert!(matches!(gamma_roots(PI, Contrast::Insulating, 2), Err(Error::InvalidAngle(_))));
        assert!(matches!(gamma_roots(1.0, Contrast::Unity, 2), Err(Error::ContrastUnity)));
    }

    #[test]
    fn rank_two_at_integer_exponent() {
        for k in [2.0, 3.0, 10.0] {
            let y = eigen_matrix(2.0, PI / 2.0, k);
            assert_eq!(rank(&y, 1e-10), 2);
            // cos 2 theta everywhere, and sin 2 theta with B^+ = k B^-
            for v in [Vector4::new(1.0, 0.0, 1.0, 0.0), Vector4::new(0.0, 1.0, 0.0, k)] {
                assert!((y * v).amax() < 1e-12);
            }
        }
        let g = gamma_roots(PI / 2.0, Contrast::Finite(3.0), 5).unwrap();
        assert!(g.iter().any(|&x| x == 2.0), "{g:?}");
        assert!(matches!(finite_eigenvector(2.0, PI / 2.0, 3.0), Err(Error::DegenerateEigenspace(_))));
    }

    #[test]
    fn eigenfunctions_insulating_and_conducting() {
        let a = PI / 2.0;
        let c = eigenfunction(a, Contrast::Insulating, 1).unwrap();
        let g = 2.0 / 3.0;
        let p = Profile { gamma: g, alpha: a, coeffs: c };
        for t in [2.0, 3.0, 5.0] {
            let want = (2.0 / (1.5 * PI)).sqrt() * (g * (t - a)).cos();
            assert!((p.at(t) - want).abs() < 1e-14);
        }
        let c = eigenfunction(a, Contrast::Conducting, 1).unwrap();
        let p = Profile { gamma: g, alpha: a, coeffs: c };
        let n = quad(|t| p.eval(t, Region::Outside).0.powi(2), a, 2.0 * PI);
        assert!((n - 1.0).abs() < 1e-10);
        assert!(p.at(a).abs() < 1e-15 && p.at(2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn square_vertex_singular_function_reproduces_leading_jumps() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let k = 2.0;
        let spec = CornerSpectrum::new(&poly, Contrast::Finite(k)).unwrap();
        let sf = singular_coefficients(0, &spec, 1.0, 1.0, 1.0, Contrast::Finite(k)).unwrap();
        let v = spec.vertex(0);
        let r = v.radius / 10.0;
        let g = v.gamma[1];
        let (c, s) = v.cs1();
        let [am, bm, _, _] = v.y1;
        // outgoing edge: d_nu u^- = -(1/r) d_theta u = -gamma B^- r^(gamma - 1)
        let want0 = (1.0 - k) * 1.0 * (-g * bm * r.powf(g - 1.0));
        // incoming edge: d_nu u^- = (1/r) d_theta u at theta = alpha
        let want1 = (1.0 - k) * 1.0 * (g * (bm * c - am * s) * r.powf(g - 1.0));
        assert!((sf.jump(r, 0) - want0).abs() < 1e-8 * want0.abs());
        assert!((sf.jump(r, 1) - want1).abs() < 1e-8 * want1.abs());
        assert!(integral_identity_check(&sf) < 1e-9);
        // the same jumps from the gradient evaluator
        let p0 = v.position + Vec2::polar(r, v.frame);
        let jump_eval = sf.eval(p0, Region::Outside).0 - sf.eval(p0, Region::Inside).0;
        assert!((jump_eval - want0).abs() < 1e-8 * want0.abs());
    }

    #[test]
    fn zero_data_gives_zero_singular_function() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let spec = CornerSpectrum::new(&poly, Contrast::Finite(2.0)).unwrap();
        for (b, hm, hp) in [(1.0, 0.0, 0.0), (0.0, 1.0, -2.0)] {
            let sf = singular_coefficients(1, &spec, b, hm, hp, Contrast::Finite(2.0)).unwrap();
            assert!(sf.is_zero());
            assert_eq!(integral_identity_check(&sf), 0.0);
            assert_eq!(sf.eval(poly.vertex(1) + Vec2::new(0.01, 0.02), Region::Outside).0, 0.0);
        }
    }

    #[test]
    fn source_vanishes_off_annulus_and_integrates() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let spec = CornerSpectrum::new(&poly, Contrast::Finite(2.0)).unwrap();
        let sf = singular_coefficients(2, &spec, 0.7, 0.4, -1.1, Contrast::Finite(2.0)).unwrap();
        let v = spec.vertex(2);
        let big = v.radius;
        for j in 0..1000 {
            let r = 1.3 * big * (j as f64 + 0.5) / 1000.0;
            let th = 2.0 * PI * ((j * 7919) % 1000) as f64 / 1000.0;
            let p = v.position + Vec2::polar(r, th);
            let region = if poly.contains(p) { Region::Inside } else { Region::Outside };
            let f = sf.source(p, region);
            if r <= 0.4 * big || r >= big {
                assert_eq!(f, 0.0);
            }
        }
        // against a polar tensor quadrature of the pointwise source
        let numeric = quad(
            |r| {
                r * (quad(|t| sf.source(v.position + Vec2::polar(r, t + v.frame), Region::Inside), 0.0, v.alpha)
                    + quad(|t| sf.source(v.position + Vec2::polar(r, t + v.frame), Region::Outside), v.alpha, 2.0 * PI))
            },
            0.4 * big,
            big,
        );
        assert!((numeric - sf.source_integral()).abs() < 1e-9 * numeric.abs().max(1.0));
        // integrating by parts: radial part equals -gamma' (a^gamma' + gamma' int_a^R r^(gamma'-1) chi dr)
        let gp = sf.exponent();
        let a = 0.4 * big;
        let alt = -gp * (a.powf(gp) + gp * quad(|r| r.powf(gp - 1.0) * cutoff(r, big).0, a, big));
        let direct = sf.source_integral() / sf.profile().weighted_integral(2.0);
        assert!((alt - direct).abs() < 1e-10 * alt.abs(), "{alt} {direct}");
    }

    #[test]
    fn cutoff_is_c2() {
        let big = 0.3;
        for &x in &[0.4 * big, big] {
            let (a, da, dda) = cutoff(x - 1e-9, big);
            let (b, db, ddb) = cutoff(x + 1e-9, big);
            assert!((a - b).abs() < 1e-8 && (da - db).abs() < 1e-6 && (dda - ddb).abs() < 1e-3);
        }
        let (_, d, _) = cutoff(0.7 * big, big);
        let fd = (cutoff(0.7 * big + 1e-7, big).0 - cutoff(0.7 * big - 1e-7, big).0) / 2e-7;
        assert!((d - fd).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exponent_ordering_and_residual(alpha in 0.05f64..6.2, lk in -3.0f64..3.0) {
            let k = lk.exp();
            prop_assume!((alpha - PI).abs() > 1e-3 && (k - 1.0).abs() > 1e-3);
            let g = gamma_roots(alpha, Contrast::Finite(k), 3).unwrap();
            let lambda = Contrast::Finite(k).lambda().unwrap();
            prop_assert!(g[0] == 0.0 && g[1] > 0.5 && g[1] < 1.0 && g[2] > 1.0);
            prop_assert!(exponent_residual(g[1], alpha, lambda).abs() < 1e-11);
            prop_assert!(exponent_residual(g[2], alpha, lambda).abs() < 1e-11);
            let sym = gamma_roots(2.0 * PI - alpha, Contrast::Finite(k), 3).unwrap();
            let inv = gamma_roots(alpha, Contrast::Finite(1.0 / k), 3).unwrap();
            prop_assert!((sym[1] - g[1]).abs() < 1e-12 && (inv[1] - g[1]).abs() < 1e-12);
            prop_assert!(normalized_det(&eigen_matrix(g[1], alpha, k)).abs() < 1e-8);
            // gamma_1 -> 1 as k -> 1, where Y(0) is singular
            if lk.abs() > 0.1 {
                prop_assert!(normalized_det(&eigen_matrix(g[1] - 1.0, alpha, k)).abs() > 1e-6);
            }
        }

        #[test]
        fn finite_eigenfunction_normalized(alpha in 0.1f64..6.1, lk in -2.5f64..2.5) {
            let k = lk.exp();
            prop_assume!((alpha - PI).abs() > 1e-2 && (k - 1.0).abs() > 1e-2);
            let c = eigenfunction(alpha, Contrast::Finite(k), 1).unwrap();
            let g = gamma_roots(alpha, Contrast::Finite(k), 2).unwrap()[1];
            let y = eigen_matrix(g, alpha, k);
            let res = (y * Vector4::from(c)).amax();
            prop_assert!(res < 1e-10);
            let p = Profile { gamma: g, alpha, coeffs: c };
            let n = k * quad(|t| p.eval(t, Region::Inside).0.powi(2), 0.0, alpha)
                + quad(|t| p.eval(t, Region::Outside).0.powi(2), alpha, 2.0 * PI);
            prop_assert!((n - 1.0).abs() < 1e-10);
            prop_assert!(c[0] >= 0.0);
        }

        #[test]
        fn identity_holds_for_random_data(alpha in 0.2f64..6.0, lk in -2.0f64..2.0,
                                          hm in -2.0f64..2.0, hp in -2.0f64..2.0, beta in -3.0f64..3.0) {
            let k = lk.exp();
            prop_assume!((alpha - PI).abs() > 1e-2 && (k - 1.0).abs() > 1e-2);
            let o = OuterDomain::Disk { center: Vec2::ZERO, radius: 10.0 };
            // a triangle with the requested angle at vertex 0
            let poly = Polygon::new(&[Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::polar(1.0, alpha.min(PI - 0.2))], &o);
            prop_assume!(poly.is_ok());
            let poly = poly.unwrap();
            let spec = CornerSpectrum::new(&poly, Contrast::Finite(k)).unwrap();
            let sf = singular_coefficients(0, &spec, beta, hm, hp, Contrast::Finite(k)).unwrap();
            let v = spec.vertex(0);
            let p = sf.profile();
            let quad_int = k * quad(|t| p.eval(t, Region::Inside).0, 0.0, v.alpha)
                + quad(|t| p.eval(t, Region::Outside).0, v.alpha, 2.0 * PI);
            prop_assert!((quad_int - p.weighted_integral(k)).abs() < 1e-9 * (1.0 + quad_int.abs()));
            prop_assert!(integral_identity_check(&sf) < 1e-8 * (1.0 + beta.abs() * (hm.abs() + hp.abs())));
        }
    }
}
