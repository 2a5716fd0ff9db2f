//! Damped Gauss-Newton reconstruction of the polygon vertices from boundary
//! measurements.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corner::Contrast;
use crate::error::{Error, Result};
use crate::fem::BoundaryFunction;
use crate::geometry::{MeshOptions, OuterDomain, PerturbationField, Polygon, Vec2};
use crate::model::Model;
use crate::shape::{shape_derivative_boundary, PairingBasis};

/// A boundary current given as a Fourier mode and the measured trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub mode: (usize, bool),
    pub trace: BoundaryFunction,
}

/// Traces for `truth`, optionally with additive Gaussian noise whose standard
/// deviation is `noise` times the RMS of each trace.
pub fn synthetic_data(
    truth: &Polygon,
    omega: &OuterDomain,
    contrast: Contrast,
    modes: &[(usize, bool)],
    opts: &MeshOptions,
    noise: f64,
    seed: u64,
) -> Result<Vec<Measurement>> {
    let model = Model::new(truth, omega, contrast, opts)?;
    let currents: Vec<BoundaryFunction> = modes.iter().map(|&(m, s)| model.fourier(m, s)).collect();
    let fields = model.solver().solve_forward_many(&currents)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(modes.len());
    for (&mode, u) in modes.iter().zip(&fields) {
        let mut trace = model.trace(u);
        if noise > 0.0 {
            let rms = trace.norm() / trace.length().sqrt();
            let dist = Normal::new(0.0, noise * rms).map_err(|e| Error::Parse(e.to_string()))?;
            let v = trace.values().iter().map(|x| x + dist.sample(&mut rng)).collect();
            trace = trace.with_values(v).mean_normalized();
        }
        out.push(Measurement { mode, trace });
    }
    Ok(out)
}

/// Vertices of `poly` with vertex `i` moved `distance` away from the barycenter.
pub fn moved_vertex(poly: &Polygon, i: usize, distance: f64) -> Vec<Vec2> {
    let mut v = poly.vertices().to_vec();
    let d = v[i] - poly.barycenter();
    v[i] = v[i] + d * (distance / d.norm());
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconOptions {
    pub mesh: MeshOptions,
    pub basis_modes: usize,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub residual_tolerance: f64,
    pub initial_damping: f64,
    pub max_damping: f64,
}

impl Default for ReconOptions {
    fn default() -> Self {
        ReconOptions {
            mesh: MeshOptions::new(0.01),
            basis_modes: 8,
            max_iterations: 50,
            step_tolerance: 1e-6,
            residual_tolerance: 1e-12,
            initial_damping: 1e-3,
            max_damping: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub residual: f64,
    pub damping: f64,
    pub max_vertex_update: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ResidualTolerance,
    StepTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionState {
    pub vertices: Vec<Vec2>,
    /// `sqrt(sum ||Lambda - data||^2)` over the measurements.
    pub residual: f64,
    pub damping: f64,
    /// Accepted steps only; row 0 is the initial state.
    pub log: Vec<LogRow>,
    pub stop: StopReason,
}

impl ReconstructionState {
    pub fn accepted_steps(&self) -> usize {
        self.log.len() - 1
    }

    pub fn max_vertex_error(&self, truth: &[Vec2]) -> f64 {
        self.vertices.iter().zip(truth).map(|(a, b)| (*a - *b).norm().max(0.0)).fold(0.0, f64::max)
    }

    /// `iter,residual,damping,max_vertex_update`.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iter,residual,damping,max_vertex_update\n");
        for r in &self.log {
            let _ = writeln!(s, "{},{:.12e},{:.6e},{:.12e}", r.iter, r.residual, r.damping, r.max_vertex_update);
        }
        s
    }
}

struct Evaluation {
    model: Model,
    residuals: Vec<BoundaryFunction>,
    norm: f64,
}

fn evaluate(poly: &Polygon, omega: &OuterDomain, contrast: Contrast, data: &[Measurement], opts: &ReconOptions) -> Result<Evaluation> {
    let model = Model::new(poly, omega, contrast, &opts.mesh)?;
    let currents: Vec<BoundaryFunction> = data.iter().map(|d| model.fourier(d.mode.0, d.mode.1)).collect();
    let fields = model.solver().solve_forward_many(&currents)?;
    let perimeter = omega.boundary_length();
    let residuals: Vec<BoundaryFunction> = fields
        .iter()
        .zip(data)
        .map(|(u, d)| {
            let t = model.trace(u);
            let target = d.trace.resampled_onto(&t, perimeter);
            t.sub(&target)
        })
        .collect();
    let norm = residuals.iter().map(|r| r.inner(r)).sum::<f64>().max(0.0).sqrt();
    Ok(Evaluation { model, residuals, norm })
}

/// Jacobian columns, one per vertex coordinate: the boundary shape derivative
/// of each measurement under that coordinate's motion field.
pub fn jacobian_columns(model: &Model, modes: &[(usize, bool)], basis_modes: usize) -> Result<Vec<Vec<BoundaryFunction>>> {
    let basis = PairingBasis::new(model, basis_modes)?;
    let tus = modes
        .iter()
        .map(|&(m, s)| model.traces(&model.forward(&model.fourier(m, s))?))
        .collect::<Result<Vec<_>>>()?;
    PerturbationField::coordinate_basis(model.polygon().len())
        .iter()
        .map(|h| tus.iter().map(|tu| shape_derivative_boundary(model, h, tu, &basis)).collect())
        .collect()
}

/// Normal equations `J^T J` and `J^T r` in the boundary `L^2` product.
fn normal_equations(ev: &Evaluation, data: &[Measurement], opts: &ReconOptions) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let modes: Vec<(usize, bool)> = data.iter().map(|d| d.mode).collect();
    let cols = jacobian_columns(&ev.model, &modes, opts.basis_modes)?;
    let m = cols.len();
    let a = DMatrix::from_fn(m, m, |i, j| cols[i].iter().zip(&cols[j]).map(|(x, y)| x.inner(y)).sum());
    let g = DVector::from_fn(m, |i, _| cols[i].iter().zip(&ev.residuals).map(|(x, r)| x.inner(r)).sum());
    Ok((a, g))
}

/// Levenberg-Marquardt iteration on the `2n` vertex coordinates.
pub fn reconstruct(
    data: &[Measurement],
    initial: &Polygon,
    omega: &OuterDomain,
    contrast: Contrast,
    opts: &ReconOptions,
) -> Result<ReconstructionState> {
    let mut poly = initial.clone();
    let mut ev = evaluate(&poly, omega, contrast, data, opts)?;
    let mut mu = opts.initial_damping;
    let mut log = vec![LogRow { iter: 0, residual: ev.norm, damping: mu, max_vertex_update: 0.0 }];
    let finish = |poly: &Polygon, ev: &Evaluation, mu: f64, log: Vec<LogRow>, stop| ReconstructionState {
        vertices: poly.vertices().to_vec(),
        residual: ev.norm,
        damping: mu,
        log,
        stop,
    };
    for iter in 1..=opts.max_iterations {
        if ev.norm <= opts.residual_tolerance {
            return Ok(finish(&poly, &ev, mu, log, StopReason::ResidualTolerance));
        }
        let (a, g) = normal_equations(&ev, data, opts)?;
        let m = a.nrows();
        loop {
            if mu > opts.max_damping {
                return Err(Error::JacobianRankDeficient(mu));
            }
            let mut lhs = a.clone();
            for i in 0..m {
                lhs[(i, i)] += mu * a[(i, i)].max(1e-12 * a.diagonal().max());
            }
            let Some(chol) = lhs.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let mut step = chol.solve(&(-&g));
            let mut candidate = None;
            for _ in 0..20 {
                let moved: Vec<Vec2> = poly
                    .vertices()
                    .iter()
                    .enumerate()
                    .map(|(i, p)| *p + Vec2::new(step[2 * i], step[2 * i + 1]))
                    .collect();
                match Polygon::new(&moved, omega) {
                    Ok(p) => {
                        candidate = Some(p);
                        break;
                    }
                    Err(_) => step *= 0.5,
                }
            }
            let Some(cand) = candidate else {
                return Err(Error::InvalidIterate(format!("no valid polygon along the step at iteration {iter}")));
            };
            let update = (0..poly.len()).map(|i| Vec2::new(step[2 * i], step[2 * i + 1]).norm()).fold(0.0, f64::max);
            if update < opts.step_tolerance {
                return Ok(finish(&poly, &ev, mu, log, StopReason::StepTolerance));
            }
            let next = evaluate(&cand, omega, contrast, data, opts)?;
            if next.norm < ev.norm {
                mu /= 3.0;
                poly = cand;
                ev = next;
                log.push(LogRow { iter, residual: ev.norm, damping: mu, max_vertex_update: update });
                break;
            }
            mu *= 10.0;
        }
    }
    Ok(finish(&poly, &ev, mu, log, StopReason::MaxIterations))
}
