use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, Criterion};
use polyshape::geometry::{generate_mesh, square};
use polyshape::shape::{shape_derivative_boundary, PairingBasis};
use polyshape::{gamma_roots, Contrast, MeshOptions, Model, OuterDomain, PerturbationField, Polygon, Vec2};

fn setup(hmax: f64) -> Model {
    let o = OuterDomain::unit_disk();
    let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
    Model::new(&poly, &o, Contrast::Finite(2.0), &MeshOptions::new(hmax)).unwrap()
}

fn gamma(c: &mut Criterion) {
    c.bench_function("gamma_roots k=2 three roots", |b| {
        b.iter(|| gamma_roots(std::hint::black_box(PI / 2.0), Contrast::Finite(2.0), 3).unwrap())
    });
}

fn mesh(c: &mut Criterion) {
    let o = OuterDomain::unit_disk();
    let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o).unwrap();
    c.bench_function("mesh hmax=0.04", |b| b.iter(|| generate_mesh(&poly, &o, &MeshOptions::new(0.04)).unwrap()));
}

fn solves(c: &mut Criterion) {
    let m = setup(0.04);
    let f = m.fourier(1, false);
    c.bench_function("forward solve hmax=0.04", |b| b.iter(|| m.forward(&f).unwrap()));
    let u = m.forward(&f).unwrap();
    let h = PerturbationField::vertex_outward(m.polygon(), 0);
    c.bench_function("material solve hmax=0.04", |b| b.iter(|| m.material(&u, &h).unwrap()));
    let tu = m.traces(&u).unwrap();
    let basis = PairingBasis::new(&m, 8).unwrap();
    c.bench_function("pairing route hmax=0.04", |b| b.iter(|| shape_derivative_boundary(&m, &h, &tu, &basis).unwrap()));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = gamma, mesh, solves
}
criterion_main!(kernels);
