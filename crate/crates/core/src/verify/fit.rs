//! Leading corner coefficient and exponent from a discrete solution.

use std::f64::consts::PI;

use crate::corner::{Contrast, CornerSpectrum};
use crate::error::{Error, Result};
use crate::fem::FemField;
use crate::geometry::{Mesh, PointLocator, Region};
use crate::quadrature::{gauss_legendre, push_mapped};

/// Result of fitting `u - u(x_i) ~ beta y_1(theta) r^gamma` at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerFit {
    pub vertex: usize,
    pub radii: Vec<f64>,
    /// Weighted angular projections onto `y_1` at each radius.
    pub projections: Vec<f64>,
    pub gamma_hat: f64,
    /// Median of `projection / r^gamma_1` over the radii.
    pub beta_hat: f64,
    /// Least-squares coefficient of `r^gamma_1` over the radii; linear in `u`.
    pub beta_linear: f64,
    /// Relative misfit of the least-squares model.
    pub residual: f64,
}

impl CornerFit {
    /// `max / min` of `projection / r^gamma_1` over the radii.
    pub fn beta_spread(&self, gamma: f64) -> f64 {
        let q: Vec<f64> = self.radii.iter().zip(&self.projections).map(|(r, p)| p / r.powf(gamma)).collect();
        let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if lo * hi <= 0.0 {
            f64::INFINITY
        } else {
            hi.max(lo) / hi.min(lo)
        }
    }
}

/// Twelve radii, log-spaced over `[0.02, 0.4] R`.
pub fn default_radii(radius: f64) -> Vec<f64> {
    (0..12).map(|j| radius * 0.02 * 20f64.powf(j as f64 / 11.0)).collect()
}

/// Element layers crossed between the vertex and radius `r` under the mesh
/// sizing.
pub fn mesh_layers(mesh: &Mesh, r: f64) -> f64 {
    let n = 400;
    let (slope, hmin, hmax) = (mesh.grading_slope(), mesh.hmin(), mesh.hmax());
    (0..n)
        .map(|j| {
            let x = r * (j as f64 + 0.5) / n as f64;
            r / n as f64 / (slope * x).clamp(hmin, hmax)
        })
        .sum()
}

/// Weighted projection of `u(r, .) - u(x_i)` onto `y_1` at one radius.
fn projection(
    mesh: &Mesh,
    loc: &PointLocator,
    u: &FemField,
    spectrum: &CornerSpectrum,
    i: usize,
    r: f64,
) -> Result<f64> {
    let v = spectrum.vertex(i);
    let k = spectrum.contrast.k();
    let centre = u.value(mesh.vertex_node(i, Region::Outside));
    let rule = gauss_legendre(8);
    let mut total = 0.0;
    let sides: &[(Region, f64, f64)] = &[(Region::Inside, 0.0, v.alpha), (Region::Outside, v.alpha, 2.0 * PI)];
    let p1 = v.profile1();
    for &(region, a, b) in sides {
        let weight = match (region, k) {
            (Region::Inside, Some(k)) => k,
            (Region::Inside, None) => continue,
            (Region::Outside, _) => 1.0,
        };
        let mut nodes = Vec::new();
        for s in 0..8 {
            let (x0, x1) = (a + (b - a) * s as f64 / 8.0, a + (b - a) * (s + 1) as f64 / 8.0);
            push_mapped(&rule, x0, x1, &mut nodes);
        }
        for (th, w) in nodes {
            let p = v.position + crate::geometry::Vec2::polar(r, th + v.frame);
            let val = u
                .interpolate(mesh, loc, p, Some(region))
                .ok_or_else(|| Error::InsufficientResolution { vertex: i, layers: 0 })?;
            total += weight * w * (val - centre) * p1.eval(th, region).0;
        }
    }
    Ok(total)
}

/// Fits the leading corner term of `u` at vertex `i` over the given radii.
pub fn estimate_beta(
    mesh: &Mesh,
    loc: &PointLocator,
    u: &FemField,
    spectrum: &CornerSpectrum,
    i: usize,
    radii: &[f64],
) -> Result<CornerFit> {
    if spectrum.contrast == Contrast::Unity {
        return Err(Error::ContrastUnity);
    }
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    let layers = mesh_layers(mesh, rmax);
    if layers < 8.0 {
        return Err(Error::InsufficientResolution { vertex: i, layers: layers as usize });
    }
    let gamma = spectrum.vertex(i).gamma[1];
    let projections = radii.iter().map(|&r| projection(mesh, loc, u, spectrum, i, r)).collect::<Result<Vec<_>>>()?;
    let mut q: Vec<f64> = radii.iter().zip(&projections).map(|(r, p)| p / r.powf(gamma)).collect();
    q.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = q.len();
    let beta_hat = if n % 2 == 1 { q[n / 2] } else { 0.5 * (q[n / 2 - 1] + q[n / 2]) };
    let (num, den) = radii
        .iter()
        .zip(&projections)
        .fold((0.0, 0.0), |(a, b), (r, p)| (a + p * r.powf(gamma), b + r.powf(2.0 * gamma)));
    let beta_linear = num / den;
    let misfit: f64 = radii.iter().zip(&projections).map(|(r, p)| (p - beta_linear * r.powf(gamma)).powi(2)).sum();
    let scale: f64 = projections.iter().map(|p| p * p).sum();
    let residual = if scale > 0.0 { (misfit / scale).sqrt() } else { 0.0 };
    // log-log slope over the radii where the projection keeps one sign
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&projections)
        .filter(|(_, p)| p.abs() > 0.0)
        .map(|(r, p)| (r.ln(), p.abs().ln()))
        .collect();
    let gamma_hat = if pts.len() >= 2 { log_slope(&pts) } else { f64::NAN };
    Ok(CornerFit { vertex: i, radii: radii.to_vec(), projections, gamma_hat, beta_hat, beta_linear, residual })
}

/// Least-squares slope of `y` against `x`.
pub fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, square, MeshOptions, OuterDomain, Polygon, Vec2};
    use rand::{Rng, SeedableRng};

    fn setup(c: Contrast) -> (Mesh, PointLocator, CornerSpectrum) {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let mesh = generate_mesh(&poly, &o, &MeshOptions::new(0.05).duplicated(true)).unwrap();
        let loc = PointLocator::new(&mesh);
        (mesh, loc, CornerSpectrum::new(&poly, c).unwrap())
    }

    fn synthetic(mesh: &Mesh, spec: &CornerSpectrum, i: usize, terms: &[(f64, usize)], noise: f64) -> FemField {
        let v = spec.vertex(i);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut u = FemField::zeros(mesh.n_nodes());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let region = mesh.regions()[t];
            for &k in tri {
                let (r, th) = v.polar(mesh.node(k), region);
                let mut val = 0.25;
                for &(b, j) in terms {
                    let p = if j == 1 { v.profile1() } else { v.profile2().unwrap() };
                    val += b * p.eval(th, region).0 * r.powf(v.gamma[j]);
                }
                u.values_mut()[k] = val;
            }
        }
        for x in u.values_mut() {
            *x += noise * rng.random_range(-1.0..1.0);
        }
        u
    }

    #[test]
    fn recovers_its_own_model() {
        let (mesh, loc, spec) = setup(Contrast::Finite(2.0));
        let u = synthetic(&mesh, &spec, 1, &[(0.8, 1)], 1e-6);
        let radii = default_radii(spec.vertex(1).radius);
        let fit = estimate_beta(&mesh, &loc, &u, &spec, 1, &radii).unwrap();
        // P1 interpolation of r^gamma on the graded fan bounds the accuracy
        assert!((fit.beta_hat / 0.8 - 1.0).abs() < 1e-2, "{fit:?}");
        assert!((fit.gamma_hat - spec.vertex(1).gamma[1]).abs() < 1e-2, "{fit:?}");
        let scaled = estimate_beta(&mesh, &loc, &u.scaled(-2.5), &spec, 1, &radii).unwrap();
        assert!((scaled.beta_linear + 2.5 * fit.beta_linear).abs() < 1e-10 * fit.beta_linear.abs());
        assert!((scaled.beta_hat + 2.5 * fit.beta_hat).abs() < 1e-10 * fit.beta_hat.abs());
    }

    #[test]
    fn second_term_is_projected_out() {
        let (mesh, loc, spec) = setup(Contrast::Finite(3.0));
        let u = synthetic(&mesh, &spec, 0, &[(1.0, 1), (2.0, 2)], 0.0);
        let fit = estimate_beta(&mesh, &loc, &u, &spec, 0, &default_radii(spec.vertex(0).radius)).unwrap();
        assert!((fit.beta_hat - 1.0).abs() < 1e-2, "{fit:?}");
    }

    #[test]
    fn insulating_fit_uses_outside_only() {
        let (mesh, loc, spec) = setup(Contrast::Insulating);
        let u = synthetic(&mesh, &spec, 2, &[(-0.4, 1)], 0.0);
        let fit = estimate_beta(&mesh, &loc, &u, &spec, 2, &default_radii(spec.vertex(2).radius)).unwrap();
        assert!((fit.beta_hat / -0.4 - 1.0).abs() < 1e-2);
        assert!((fit.gamma_hat - 2.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        let o = OuterDomain::unit_disk();
        let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
        let mesh = generate_mesh(&poly, &o, &MeshOptions::new(0.2).grading(1.0, 0)).unwrap();
        let loc = PointLocator::new(&mesh);
        let spec = CornerSpectrum::new(&poly, Contrast::Finite(2.0)).unwrap();
        let u = FemField::zeros(mesh.n_nodes());
        let e = estimate_beta(&mesh, &loc, &u, &spec, 0, &default_radii(spec.vertex(0).radius));
        assert!(matches!(e, Err(Error::InsufficientResolution { .. })));
    }
}
