//! Coarse end-to-end runs of the public API.

use polyshape::geometry::square;
use polyshape::shape::{material_trace, shape_derivative_boundary, PairingBasis};
use polyshape::transmission::transmission_trace;
use polyshape::{Contrast, Error, MeshOptions, Model, OuterDomain, PerturbationField, Polygon, Vec2};
use proptest::prelude::*;

fn model(c: Contrast, hmax: f64) -> Model {
    let o = OuterDomain::unit_disk();
    let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
    Model::new(&poly, &o, c, &MeshOptions::new(hmax)).unwrap()
}

#[test]
fn nonzero_mean_current_is_rejected() {
    let m = model(Contrast::Finite(2.0), 0.08);
    let f = m.fourier(1, false);
    let shifted = f.with_values(f.values().iter().map(|v| v + 1.0).collect());
    assert!(matches!(m.forward(&shifted), Err(Error::NonZeroMeanCurrent(_))));
}

#[test]
fn routes_agree_on_a_coarse_mesh() {
    let m = model(Contrast::Finite(2.0), 0.04);
    let u = m.forward(&m.fourier(1, false)).unwrap();
    let h = PerturbationField::vertex_outward(m.polygon(), 0);
    let material = material_trace(&m, &u, &h).unwrap();
    let basis = PairingBasis::new(&m, 8).unwrap();
    let pairing = shape_derivative_boundary(&m, &h, &m.traces(&u).unwrap(), &basis).unwrap();
    let transmission = transmission_trace(&m, &u, &h).unwrap();
    assert!(material.relative_distance(&pairing) < 0.05);
    assert!(transmission.relative_distance(&material) < 0.05);
}

#[test]
fn unity_contrast_derivative_vanishes() {
    let h_of = |m: &Model| PerturbationField::dilation(m.polygon());
    // u = x is exact in P1, so the discrete derivative is zero to rounding
    let m = model(Contrast::Unity, 0.06);
    let u = m.forward(&m.fourier(1, false)).unwrap();
    assert!(material_trace(&m, &u, &h_of(&m)).unwrap().norm() < 1e-12);
    // for a quadratic potential it is a discretization error that decays
    let norms: Vec<f64> = [0.06, 0.03]
        .iter()
        .map(|&hm| {
            let m = model(Contrast::Unity, hm);
            let u = m.forward(&m.fourier(2, true)).unwrap();
            material_trace(&m, &u, &h_of(&m)).unwrap().norm()
        })
        .collect();
    assert!(norms[1] < 0.5 * norms[0], "{norms:?}");
}

#[test]
fn insulating_and_conducting_routes_agree() {
    for c in [Contrast::Insulating, Contrast::Conducting] {
        let m = model(c, 0.04);
        let u = m.forward(&m.fourier(1, false)).unwrap();
        let h = PerturbationField::edge_normal(m.polygon(), 1);
        let material = material_trace(&m, &u, &h).unwrap();
        let basis = PairingBasis::new(&m, 8).unwrap();
        let pairing = shape_derivative_boundary(&m, &h, &m.traces(&u).unwrap(), &basis).unwrap();
        assert!(material.relative_distance(&pairing) < 0.05, "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pairing_route_is_linear_in_h(a in -2.0f64..2.0, b in -2.0f64..2.0, i in 0usize..4, j in 0usize..4) {
        let m = model(Contrast::Finite(3.0), 0.08);
        let u = m.forward(&m.fourier(1, true)).unwrap();
        let tu = m.traces(&u).unwrap();
        let basis = PairingBasis::new(&m, 6).unwrap();
        let h1 = PerturbationField::vertex_outward(m.polygon(), i);
        let h2 = PerturbationField::edge_normal(m.polygon(), j);
        let combo = h1.combine(a, &h2, b);
        let lhs = shape_derivative_boundary(&m, &combo, &tu, &basis).unwrap();
        let d1 = shape_derivative_boundary(&m, &h1, &tu, &basis).unwrap();
        let d2 = shape_derivative_boundary(&m, &h2, &tu, &basis).unwrap();
        let rhs = d1.scaled(a).add_scaled(b, &d2);
        let scale = d1.norm() * a.abs() + d2.norm() * b.abs() + 1e-300;
        prop_assert!(lhs.sub(&rhs).norm() / scale < 1e-10);
    }
}
