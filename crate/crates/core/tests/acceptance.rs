//! Acceptance run: one PASS/FAIL line per criterion. Tolerances are pinned
//! here, independent of the campaign constants.

use std::time::Instant;

use polyshape::geometry::square;
use polyshape::shape::taylor_remainder;
use polyshape::verify::{
    forward_metrics, gamma_metrics, max_ratio, moved_vertex, presets, reconstruct, route_study, run_verification_campaign,
    synthetic_data, transmission_metrics, CampaignConfig, ReconOptions, ReconstructionState,
};
use polyshape::{Contrast, MeshOptions, Model, OuterDomain, PerturbationField, Polygon, Vec2};

const GAMMA_CLOSED_FORM: f64 = 1e-10;
const GAMMA_RESIDUAL: f64 = 1e-11;
const DET_AT_ROOT: f64 = 1e-8;
const DET_SHIFTED: f64 = 1e-6;
const FORWARD_ERROR: f64 = 1e-2;
const FORWARD_ORDER: f64 = 1.5;
const RECIPROCITY: f64 = 1e-9;
const GAMMA_FIT_REL: f64 = 0.05;
const GAMMA_FIT_ABS: f64 = 0.05;
const SLOPE: (f64, f64) = (1.8, 2.2);
const ROUTE_DISTANCE: f64 = 0.05;
const CANCELLATION: f64 = 0.1;
const RECON_NOISELESS: f64 = 5e-3;
const RECON_NOISY: f64 = 5e-2;
const NOISE: f64 = 0.01;
/// Relative residual change of the last accepted step that counts as a plateau.
const PLATEAU: f64 = 1e-2;

struct Line {
    id: usize,
    pass: bool,
    detail: String,
}

fn cfg(contrast: Contrast) -> CampaignConfig {
    CampaignConfig { contrast, ..CampaignConfig::default() }
}

fn criterion_1() -> polyshape::Result<Line> {
    let g = gamma_metrics()?;
    let pass = g.closed_form_error < GAMMA_CLOSED_FORM
        && g.insulating_error < GAMMA_CLOSED_FORM
        && g.grid_size == 200
        && g.gamma1_min > 0.5
        && g.gamma1_max < 1.0
        && g.gamma2_min > 1.0
        && g.max_residual < GAMMA_RESIDUAL;
    let detail = format!(
        "closed form {:.1e}, insulating {:.1e}, grid {} with gamma_1 in [{:.4}, {:.4}], gamma_2 >= {:.4}, residual {:.1e}",
        g.closed_form_error, g.insulating_error, g.grid_size, g.gamma1_min, g.gamma1_max, g.gamma2_min, g.max_residual
    );
    Ok(Line { id: 1, pass, detail })
}

fn criterion_2() -> polyshape::Result<Line> {
    let g = gamma_metrics()?;
    let ranks_ok = g.ranks_at_two.len() == 3 && g.ranks_at_two.iter().all(|&(_, r)| r == 2);
    let pass = g.max_det_at_root < DET_AT_ROOT && g.min_det_shifted > DET_SHIFTED && ranks_ok;
    let detail = format!(
        "max |det Y(gamma_1)| {:.1e}, min |det Y(gamma_1 - 1)| {:.1e}, ranks at 2 {:?}",
        g.max_det_at_root,
        g.min_det_shifted,
        g.ranks_at_two.iter().map(|r| r.1).collect::<Vec<_>>()
    );
    Ok(Line { id: 2, pass, detail })
}

/// Disk oracle and reciprocity for one contrast; `(pass, summary)`.
fn forward_for(c: Contrast) -> polyshape::Result<(bool, String)> {
    let f = forward_metrics(&cfg(c))?;
    let at = f.errors.iter().find(|e| (e.0 - 0.02).abs() < 1e-12).map_or(f64::NAN, |e| e.1);
    let pass = at < FORWARD_ERROR && f.order >= FORWARD_ORDER && f.reciprocity < RECIPROCITY;
    Ok((pass, format!("{}: error {:.1e}, order {:.2}, reciprocity {:.1e}", c.label(), at, f.order, f.reciprocity)))
}

fn criterion_3() -> polyshape::Result<Line> {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [Contrast::Finite(2.0), Contrast::Insulating, Contrast::Conducting] {
        let (p, s) = forward_for(c)?;
        pass &= p;
        parts.push(s);
    }
    Ok(Line { id: 3, pass, detail: parts.join("; ") })
}

fn square_model(c: Contrast, hmax: f64) -> polyshape::Result<Model> {
    let o = OuterDomain::unit_disk();
    let poly = Polygon::new(&square(Vec2::ZERO, 0.3), &o)?;
    Model::new(&poly, &o, c, &MeshOptions::new(hmax))
}

/// Largest gamma-fit error over the square's vertices: relative for finite
/// contrast, absolute against 2/3 for the degenerate ones.
fn corner_for(c: Contrast) -> polyshape::Result<(bool, String)> {
    let m = square_model(c, 0.01)?;
    let u = m.forward(&m.fourier(1, false))?;
    let fits = m.corner_fits(&u)?;
    let spec = m.spectrum().expect("corner spectrum");
    let (err, tol) = if c.is_degenerate() {
        (fits.iter().map(|f| (f.gamma_hat - 2.0 / 3.0).abs()).fold(0.0, f64::max), GAMMA_FIT_ABS)
    } else {
        (fits.iter().map(|f| (f.gamma_hat / spec.vertex(f.vertex).gamma[1] - 1.0).abs()).fold(0.0, f64::max), GAMMA_FIT_REL)
    };
    Ok((fits.len() == 4 && err < tol, format!("{}: gamma fit error {:.1e}", c.label(), err)))
}

fn criterion_4() -> polyshape::Result<Line> {
    let (a, sa) = corner_for(Contrast::Finite(2.0))?;
    let (b, sb) = corner_for(Contrast::Insulating)?;
    Ok(Line { id: 4, pass: a && b, detail: format!("{sa}; {sb}") })
}

fn taylor_for(c: Contrast) -> polyshape::Result<(bool, String)> {
    let m = square_model(c, 0.01)?;
    let f = m.fourier(1, false);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, h) in presets(m.polygon()) {
        let s = taylor_remainder(&m, &f, &h, &[0.08, 0.04, 0.02, 0.01])?.slope;
        pass &= s >= SLOPE.0 && s <= SLOPE.1;
        parts.push(format!("{name} {s:.3}"));
    }
    Ok((pass, format!("{}: slopes {}", c.label(), parts.join(", "))))
}

fn criterion_5() -> polyshape::Result<Line> {
    let (pass, detail) = taylor_for(Contrast::Finite(2.0))?;
    Ok(Line { id: 5, pass, detail })
}

/// Route distances at hmax 0.01, 0.005, 0.0025 for the outward vertex motion.
fn routes_for(c: Contrast) -> polyshape::Result<(bool, String)> {
    let cfg = cfg(c);
    let poly = Polygon::new(&cfg.polygon, &cfg.omega)?;
    let levels = route_study(&cfg, &PerturbationField::vertex_outward(&poly, 0))?;
    let mut pass = levels.len() == 3 && levels[0].max_distance() < ROUTE_DISTANCE;
    let mut parts = Vec::new();
    for (j, (name, _)) in levels[0].distances().into_iter().enumerate() {
        let series: Vec<f64> = levels.iter().map(|l| l.distances()[j].1).collect();
        pass &= max_ratio(&series) < 1.0;
        parts.push(format!("{name} {}", series.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join(" > ")));
    }
    Ok((pass, format!("{}: {}", c.label(), parts.join(", "))))
}

fn criterion_6() -> polyshape::Result<Line> {
    let (a, sa) = routes_for(Contrast::Finite(2.0))?;
    let (b, sb) = routes_for(Contrast::Finite(0.5))?;
    Ok(Line { id: 6, pass: a && b, detail: format!("{sa}; {sb}") })
}

fn criterion_7() -> polyshape::Result<Line> {
    let cfg = cfg(Contrast::Finite(2.0));
    let poly = Polygon::new(&cfg.polygon, &cfg.omega)?;
    let model = Model::new(&poly, &cfg.omega, cfg.contrast, &cfg.mesh_options(cfg.hmax))?;
    let t = transmission_metrics(&cfg, &model)?;
    let res: Vec<f64> = t.compatibility.iter().map(|r| r.residual().abs()).collect();
    let decreasing = res.len() == 4 && max_ratio(&res) < 1.0;
    let cancel = t.delta.iter().find(|r| (r.delta - 0.1).abs() < 1e-12).map_or(f64::INFINITY, |r| r.cancellation());
    let pass = t.excites_corners() && decreasing && cancel < CANCELLATION;
    let detail = format!(
        "residuals {} over delta {:?}, cancellation at 0.1 {:.1e}",
        res.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" "),
        cfg.deltas,
        cancel
    );
    Ok(Line { id: 7, pass, detail })
}

fn criterion_8() -> polyshape::Result<Line> {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [Contrast::Insulating, Contrast::Conducting] {
        for (p, s) in [forward_for(c)?, corner_for(c)?, taylor_for(c)?, routes_for(c)?] {
            pass &= p;
            parts.push(s);
        }
    }
    Ok(Line { id: 8, pass, detail: parts.join("; ") })
}

fn recon_run(noise: f64) -> polyshape::Result<(ReconstructionState, Vec<Vec2>)> {
    let seed = 1;
    let hmax = 0.01;
    let o = OuterDomain::unit_disk();
    let c = Contrast::Finite(2.0);
    let initial = Polygon::new(&square(Vec2::ZERO, 0.3), &o)?;
    let truth = moved_vertex(&initial, 0, 0.03);
    let truth_poly = Polygon::new(&truth, &o)?;
    // Data mesh twice as fine, with a different seed.
    let data_mesh = MeshOptions::new(hmax / 2.0).seed(seed + 1);
    let data = synthetic_data(&truth_poly, &o, c, &[(1, false), (1, true)], &data_mesh, noise, seed + 1)?;
    let opts = ReconOptions { mesh: MeshOptions::new(hmax).seed(seed), ..ReconOptions::default() };
    Ok((reconstruct(&data, &initial, &o, c, &opts)?, truth))
}

fn criterion_9() -> polyshape::Result<Line> {
    let (clean, truth) = recon_run(0.0)?;
    let e0 = clean.max_vertex_error(&truth);
    let (noisy, _) = recon_run(NOISE)?;
    let e1 = noisy.max_vertex_error(&truth);
    let r: Vec<f64> = noisy.log.iter().map(|l| l.residual).collect();
    let monotone = r.windows(2).all(|w| w[1] <= w[0]);
    let plateau = r.len() >= 2 && (r[r.len() - 2] - r[r.len() - 1]) / r[r.len() - 1] < PLATEAU;
    let pass = e0 < RECON_NOISELESS && e1 < RECON_NOISY && monotone && plateau;
    let detail = format!(
        "noiseless error {e0:.2e} ({} steps); 1% noise error {e1:.2e} ({} steps), monotone {monotone}, plateau {plateau}",
        clean.accepted_steps(),
        noisy.accepted_steps()
    );
    Ok(Line { id: 9, pass, detail })
}

fn criterion_10() -> polyshape::Result<Line> {
    let cfg = CampaignConfig::default();
    let a = run_verification_campaign(&cfg)?.to_text();
    let b = run_verification_campaign(&cfg)?.to_text();
    let pass = a.as_bytes() == b.as_bytes();
    Ok(Line { id: 10, pass, detail: format!("two default campaigns, {} bytes, identical {pass}", a.len()) })
}

fn main() {
    let criteria: [(usize, fn() -> polyshape::Result<Line>); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let t = Instant::now();
        let line = run().unwrap_or_else(|e| Line { id, pass: false, detail: format!("error: {e}") });
        if !line.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2}: {}  [{:.0}s] {}",
            line.id,
            if line.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            line.detail
        );
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
