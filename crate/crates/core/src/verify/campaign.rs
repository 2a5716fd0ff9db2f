//! The verification campaign: every check runs on freshly generated meshes and
//! is reported as a metric against a fixed bound.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::corner::{eigen_matrix, exponent_residual, gamma_roots, normalized_det, rank, Contrast};
use crate::error::Result;
use crate::fem::BoundaryFunction;
use crate::geometry::{equal_area_ngon, square, MeshOptions, OuterDomain, PerturbationField, Polygon, Vec2};
use crate::model::Model;
use crate::shape::{material_trace, shape_derivative_boundary, taylor_remainder, PairingBasis, TaylorStudy};
use crate::transmission::{
    assemble_sources, check_compatibility, delta_terms, solve_transmission, verify_trace_identity, vertex_values,
    CompatibilityRow, DeltaRow,
};

use super::fit::log_slope;

pub const GAMMA_CLOSED_FORM: f64 = 1e-10;
pub const GAMMA_RESIDUAL: f64 = 1e-11;
pub const DET_AT_ROOT: f64 = 1e-8;
pub const DET_SHIFTED: f64 = 1e-6;
pub const FORWARD_ERROR: f64 = 1e-2;
pub const FORWARD_ORDER: f64 = 1.5;
pub const RECIPROCITY: f64 = 1e-9;
pub const GAMMA_FIT_REL: f64 = 0.05;
pub const GAMMA_FIT_DEGENERATE: f64 = 0.05;
pub const TAYLOR_SLOPE: (f64, f64) = (1.8, 2.2);
pub const ROUTE_DISTANCE: f64 = 0.05;
pub const TRACE_IDENTITY: f64 = 0.05;
pub const DELTA_CANCELLATION: f64 = 0.1;
pub const COMPATIBILITY_FINAL: f64 = 1e-2;
pub const ZERO_DERIVATIVE: f64 = 1e-12;

/// Acceptance region of a metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Below(f64),
    Above(f64),
    Between(f64, f64),
}

impl Bound {
    pub fn holds(self, x: f64) -> bool {
        match self {
            Bound::Below(b) => x < b,
            Bound::Above(b) => x > b,
            Bound::Between(a, b) => x >= a && x <= b,
        }
    }

    fn describe(self) -> String {
        match self {
            Bound::Below(b) => format!("< {b:e}"),
            Bound::Above(b) => format!("> {b:e}"),
            Bound::Between(a, b) => format!("in [{a}, {b}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub section: &'static str,
    pub name: String,
    pub metric: f64,
    pub bound: Bound,
}

impl Check {
    pub fn new(section: &'static str, name: impl Into<String>, metric: f64, bound: Bound) -> Self {
        Check { section, name: name.into(), metric, bound }
    }

    pub fn passed(&self) -> bool {
        self.bound.holds(self.metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    /// Checks skipped because they do not apply, with the reason.
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// One section header per check group, one line per check. No timings,
    /// so equal inputs give equal bytes.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.title);
        let mut current = "";
        for c in &self.checks {
            if c.section != current {
                current = c.section;
                let _ = writeln!(s, "\n[{current}]");
            }
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{:<44} {:>14.6e}  {:<18} {verdict}", c.name, c.metric, c.bound.describe());
        }
        if !self.notes.is_empty() {
            s.push_str("\n[notes]\n");
            for n in &self.notes {
                let _ = writeln!(s, "{n}");
            }
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "\n{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

/// Inputs of the campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub omega: OuterDomain,
    pub polygon: Vec<Vec2>,
    pub contrast: Contrast,
    /// Boundary current `f` as a Fourier mode.
    pub current: (usize, bool),
    /// Test current `g` for the trace identity.
    pub probe: (usize, bool),
    /// Finest size of the corner, Taylor and route checks at the first level.
    pub hmax: f64,
    /// Halvings of `hmax` in the route study.
    pub refinements: usize,
    /// Sizes of the forward-oracle study, coarse to fine.
    pub forward_levels: Vec<f64>,
    pub seed: u64,
    pub taylor_t: Vec<f64>,
    pub basis_modes: usize,
    /// Excision radii as fractions of the vertex radius.
    pub deltas: Vec<f64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            omega: OuterDomain::unit_disk(),
            polygon: square(Vec2::ZERO, 0.3),
            contrast: Contrast::Finite(2.0),
            current: (1, false),
            probe: (1, false),
            hmax: 0.01,
            refinements: 2,
            forward_levels: vec![0.04, 0.02, 0.01],
            seed: 1,
            taylor_t: vec![0.08, 0.04, 0.02, 0.01],
            basis_modes: 8,
            deltas: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

impl CampaignConfig {
    pub fn mesh_options(&self, hmax: f64) -> MeshOptions {
        MeshOptions::new(hmax).seed(self.seed)
    }

    pub fn route_levels(&self) -> Vec<f64> {
        (0..=self.refinements).map(|j| self.hmax / f64::powi(2.0, j as i32)).collect()
    }
}

/// Exponent solver and transmission-matrix checks over an `(alpha, k)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMetrics {
    pub closed_form_error: f64,
    pub insulating_error: f64,
    pub grid_size: usize,
    pub gamma1_min: f64,
    pub gamma1_max: f64,
    pub gamma2_min: f64,
    pub max_residual: f64,
    pub max_det_at_root: f64,
    pub min_det_shifted: f64,
    /// `(k, rank of Y(2, pi/2, k))`.
    pub ranks_at_two: Vec<(f64, usize)>,
}

pub const GRID_ANGLES: usize = 20;
pub const GRID_CONTRASTS: [f64; 10] = [0.05, 0.1, 0.2, 0.5, 0.8, 1.25, 2.0, 5.0, 10.0, 20.0];

pub fn gamma_metrics() -> Result<GammaMetrics> {
    let g = gamma_roots(PI / 2.0, Contrast::Finite(2.0), 2)?[1];
    let closed_form_error = (g - 2.0 / PI * (1.0f64 / 6.0).acos()).abs();
    let gi = gamma_roots(PI / 2.0, Contrast::Insulating, 2)?[1];
    let insulating_error = (gi - 2.0 / 3.0).abs();
    let mut m = GammaMetrics {
        closed_form_error,
        insulating_error,
        grid_size: 0,
        gamma1_min: f64::INFINITY,
        gamma1_max: f64::NEG_INFINITY,
        gamma2_min: f64::INFINITY,
        max_residual: 0.0,
        max_det_at_root: 0.0,
        min_det_shifted: f64::INFINITY,
        ranks_at_two: Vec::new(),
    };
    for a in 0..GRID_ANGLES {
        let alpha = 0.2 + 5.8 * a as f64 / (GRID_ANGLES - 1) as f64;
        for &k in &GRID_CONTRASTS {
            let c = Contrast::Finite(k);
            let r = gamma_roots(alpha, c, 3)?;
            let lambda = c.lambda().unwrap_or(0.0);
            m.grid_size += 1;
            m.gamma1_min = m.gamma1_min.min(r[1]);
            m.gamma1_max = m.gamma1_max.max(r[1]);
            m.gamma2_min = m.gamma2_min.min(r[2]);
            for &x in &r[1..] {
                m.max_residual = m.max_residual.max(exponent_residual(x, alpha, lambda).abs());
            }
            m.max_det_at_root = m.max_det_at_root.max(normalized_det(&eigen_matrix(r[1], alpha, k)).abs());
            m.min_det_shifted = m.min_det_shifted.min(normalized_det(&eigen_matrix(r[1] - 1.0, alpha, k)).abs());
        }
    }
    m.ranks_at_two = [2.0, 3.0, 10.0].iter().map(|&k| (k, rank(&eigen_matrix(2.0, PI / 2.0, k), 1e-10))).collect();
    Ok(m)
}

/// Boundary-trace factor of a centered disk inclusion of radius `rho` in the
/// unit disk, for the current `cos m theta`.
pub fn disk_trace_factor(contrast: Contrast, rho: f64, m: usize) -> f64 {
    let q = rho.powi(2 * m as i32);
    // the reflection coefficient (k - 1) / (k + 1) of the inclusion
    let r = match contrast {
        Contrast::Finite(k) => (k - 1.0) / (k + 1.0),
        Contrast::Unity => 0.0,
        Contrast::Insulating => -1.0,
        Contrast::Conducting => 1.0,
    };
    (1.0 - r * q) / (m as f64 * (1.0 + r * q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardMetrics {
    /// `(hmax, relative boundary error)` against the disk series.
    pub errors: Vec<(f64, f64)>,
    pub order: f64,
    /// Largest relative reciprocity defect over the Fourier pairs.
    pub reciprocity: f64,
}

/// Equal-area 64-gon of radius `0.5` against the disk series, and
/// reciprocity on the campaign polygon.
pub fn forward_metrics(cfg: &CampaignConfig) -> Result<ForwardMetrics> {
    let rho = 0.5;
    let disk = Polygon::new(&equal_area_ngon(Vec2::ZERO, rho, 64), &cfg.omega)?;
    let mut errors = Vec::new();
    for &h in &cfg.forward_levels {
        let model = Model::new(&disk, &cfg.omega, cfg.contrast, &cfg.mesh_options(h))?;
        let f = model.fourier(1, false);
        let u = model.forward(&f)?;
        let want = f.scaled(disk_trace_factor(cfg.contrast, rho, 1));
        errors.push((h, model.trace(&u).relative_distance(&want)));
    }
    let order = if errors.len() >= 2 {
        log_slope(&errors.iter().map(|&(h, e)| (h.ln(), e.ln())).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    let poly = Polygon::new(&cfg.polygon, &cfg.omega)?;
    let coarse = cfg.forward_levels.first().copied().unwrap_or(cfg.hmax);
    let model = Model::new(&poly, &cfg.omega, cfg.contrast, &cfg.mesh_options(coarse))?;
    let fs = model.test_currents(5);
    let us = model.solver().solve_forward_many(&fs)?;
    let traces: Vec<BoundaryFunction> = us.iter().map(|u| model.trace(u)).collect();
    let n = fs.len();
    let mut reciprocity = 0.0f64;
    for a in 0..n {
        let b = (a + 3) % n;
        let d = (traces[a].inner(&fs[b]) - traces[b].inner(&fs[a])).abs() / (fs[a].norm() * fs[b].norm());
        reciprocity = reciprocity.max(d);
    }
    Ok(ForwardMetrics { errors, order, reciprocity })
}

/// Vertex motion, dilation and single-edge normal motion.
pub fn presets(poly: &Polygon) -> Vec<(&'static str, PerturbationField)> {
    vec![
        ("vertex", PerturbationField::vertex_outward(poly, 0)),
        ("dilation", PerturbationField::dilation(poly)),
        ("edge", PerturbationField::edge_normal(poly, 1)),
    ]
}

/// Pairwise relative distances among the derivative routes at one mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteLevel {
    pub hmax: f64,
    pub pairing_material: f64,
    /// `None` for degenerate contrasts.
    pub transmission_material: Option<f64>,
    pub transmission_pairing: Option<f64>,
    pub material_norm: f64,
    pub pairing_norm: f64,
}

impl RouteLevel {
    pub fn max_distance(&self) -> f64 {
        let mut m = self.pairing_material;
        for x in [self.transmission_material, self.transmission_pairing].into_iter().flatten() {
            m = m.max(x);
        }
        m
    }

    /// The available distances in a fixed order.
    pub fn distances(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("pairing-material", self.pairing_material)];
        if let Some(x) = self.transmission_material {
            v.push(("transmission-material", x));
        }
        if let Some(x) = self.transmission_pairing {
            v.push(("transmission-pairing", x));
        }
        v
    }
}

fn distance(a: &BoundaryFunction, b: &BoundaryFunction) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        a.sub(b).norm() / scale
    }
}

pub fn route_level(cfg: &CampaignConfig, h: &PerturbationField, hmax: f64) -> Result<RouteLevel> {
    let poly = Polygon::new(&cfg.polygon, &cfg.omega)?;
    let model = Model::new(&poly, &cfg.omega, cfg.contrast, &cfg.mesh_options(hmax))?;
    let u = model.forward(&model.fourier(cfg.current.0, cfg.current.1))?;
    let tu = model.traces(&u)?;
    let basis = PairingBasis::new(&model, cfg.basis_modes)?;
    let pairing = shape_derivative_boundary(&model, h, &tu, &basis)?;
    let material = material_trace(&model, &u, h)?;
    let (mut tm, mut tp) = (None, None);
    if let Contrast::Finite(_) = cfg.contrast {
        let betas = model.betas(&u)?;
        let w = solve_transmission(&model, &assemble_sources(&model, &u, h, &betas)?)?;
        tm = Some(distance(&w.trace, &material));
        tp = Some(distance(&w.trace, &pairing));
    }
    Ok(RouteLevel {
        hmax,
        pairing_material: distance(&pairing, &material),
        transmission_material: tm,
        transmission_pairing: tp,
        material_norm: material.norm(),
        pairing_norm: pairing.norm(),
    })
}

pub fn route_study(cfg: &CampaignConfig, h: &PerturbationField) -> Result<Vec<RouteLevel>> {
    cfg.route_levels().into_iter().map(|hm| route_level(cfg, h, hm)).collect()
}

/// Largest ratio of consecutive values; below one means strictly decreasing.
pub fn max_ratio(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Integrability residuals, leading delta terms and the trace identity for
/// the outward motion of one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMetrics {
    pub compatibility: Vec<CompatibilityRow>,
    pub delta: Vec<DeltaRow>,
    pub trace_identity: f64,
}

impl TransmissionMetrics {
    /// Whether the perturbation reaches the leading corner terms at all; by
    /// symmetry it may not, and then both diagnostics are empty.
    pub fn excites_corners(&self) -> bool {
        self.compatibility.iter().any(|r| r.singular_term.abs() > 1e-8 * r.edge_term.abs().max(1e-300))
    }
}

pub fn transmission_metrics(cfg: &CampaignConfig, model: &Model) -> Result<TransmissionMetrics> {
    let poly = model.polygon();
    let h = PerturbationField::vertex_outward(poly, 0);
    let u = model.forward(&model.fourier(cfg.current.0, cfg.current.1))?;
    let betas = model.betas(&u)?;
    let sources = assemble_sources(model, &u, &h, &betas)?;
    let compatibility = check_compatibility(model, &u, &h, &sources, &betas, &cfg.deltas)?;
    let g = model.fourier(cfg.probe.0, cfg.probe.1);
    let v = model.forward(&g)?;
    let delta = delta_terms(&sources.singular, &vertex_values(model, &v)?, &cfg.deltas);
    let w = solve_transmission(model, &sources)?;
    let ti = verify_trace_identity(model, &w, &h, &model.traces(&u)?, &g, &model.traces(&v)?)?;
    Ok(TransmissionMetrics { compatibility, delta, trace_identity: ti.relative_residual() })
}

/// Runs every check that applies to the configured contrast.
pub fn run_verification_campaign(cfg: &CampaignConfig) -> Result<Report> {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let c = cfg.contrast;

    let g = gamma_metrics()?;
    let s = "gamma";
    checks.push(Check::new(s, "right angle k=2 vs closed form", g.closed_form_error, Bound::Below(GAMMA_CLOSED_FORM)));
    checks.push(Check::new(s, "right angle insulating vs 2/3", g.insulating_error, Bound::Below(GAMMA_CLOSED_FORM)));
    checks.push(Check::new(s, "grid gamma_1 min", g.gamma1_min, Bound::Above(0.5)));
    checks.push(Check::new(s, "grid gamma_1 max", g.gamma1_max, Bound::Below(1.0)));
    checks.push(Check::new(s, "grid gamma_2 min", g.gamma2_min, Bound::Above(1.0)));
    checks.push(Check::new(s, "grid max residual", g.max_residual, Bound::Below(GAMMA_RESIDUAL)));
    checks.push(Check::new(s, "grid max |det Y(gamma_1)|", g.max_det_at_root, Bound::Below(DET_AT_ROOT)));
    checks.push(Check::new(s, "grid min |det Y(gamma_1 - 1)|", g.min_det_shifted, Bound::Above(DET_SHIFTED)));
    for &(k, r) in &g.ranks_at_two {
        checks.push(Check::new(s, format!("rank Y(2, pi/2, k={k})"), r as f64, Bound::Between(2.0, 2.0)));
    }

    let f = forward_metrics(cfg)?;
    let s = "forward";
    for &(h, e) in &f.errors {
        if (h - 0.02).abs() < 1e-12 {
            checks.push(Check::new(s, format!("disk series error hmax={h}"), e, Bound::Below(FORWARD_ERROR)));
        }
    }
    checks.push(Check::new(s, "disk series convergence order", f.order, Bound::Above(FORWARD_ORDER)));
    checks.push(Check::new(s, "reciprocity, 10 Fourier pairs", f.reciprocity, Bound::Below(RECIPROCITY)));

    let poly = Polygon::new(&cfg.polygon, &cfg.omega)?;
    let model = Model::new(&poly, &cfg.omega, c, &cfg.mesh_options(cfg.hmax))?;
    let u = model.forward(&model.fourier(cfg.current.0, cfg.current.1))?;

    if let Some(spec) = model.spectrum() {
        let s = "corner";
        for fit in model.corner_fits(&u)? {
            let root = spec.vertex(fit.vertex).gamma[1];
            let (metric, bound) = if c.is_degenerate() {
                ((fit.gamma_hat - root).abs(), Bound::Below(GAMMA_FIT_DEGENERATE))
            } else {
                ((fit.gamma_hat / root - 1.0).abs(), Bound::Below(GAMMA_FIT_REL))
            };
            checks.push(Check::new(s, format!("vertex {} gamma fit", fit.vertex), metric, bound));
        }
    }

    let f = model.fourier(cfg.current.0, cfg.current.1);
    if c == Contrast::Unity {
        let s = "unity";
        let tu = model.traces(&u)?;
        let basis = PairingBasis::new(&model, cfg.basis_modes)?;
        for (name, h) in presets(&poly) {
            let p = shape_derivative_boundary(&model, &h, &tu, &basis)?.norm();
            let m = material_trace(&model, &u, &h)?.norm();
            checks.push(Check::new(s, format!("{name} pairing-route norm"), p, Bound::Below(ZERO_DERIVATIVE)));
            checks.push(Check::new(s, format!("{name} material-route norm"), m, Bound::Below(ZERO_DERIVATIVE)));
        }
        return Ok(Report { title: campaign_title(cfg), checks, notes });
    }

    let s = "taylor";
    for (name, h) in presets(&poly) {
        let study: TaylorStudy = taylor_remainder(&model, &f, &h, &cfg.taylor_t)?;
        let (lo, hi) = TAYLOR_SLOPE;
        checks.push(Check::new(s, format!("{name} remainder slope"), study.slope, Bound::Between(lo, hi)));
    }

    let s = "routes";
    let h = PerturbationField::vertex_outward(&poly, 0);
    let levels = route_study(cfg, &h)?;
    checks.push(Check::new(s, format!("max distance hmax={}", levels[0].hmax), levels[0].max_distance(), Bound::Below(ROUTE_DISTANCE)));
    if levels.len() >= 2 {
        for (j, (name, _)) in levels[0].distances().into_iter().enumerate() {
            let series: Vec<f64> = levels.iter().map(|l| l.distances()[j].1).collect();
            checks.push(Check::new(s, format!("{name} refinement ratio"), max_ratio(&series), Bound::Below(1.0)));
        }
    }

    if let Contrast::Finite(_) = c {
        let t = transmission_metrics(cfg, &model)?;
        if !t.excites_corners() {
            notes.push("compatibility, delta-terms: leading corner data vanish for this configuration".into());
        }
        let s = "compatibility";
        let active = t.excites_corners();
        let res: Vec<f64> = t.compatibility.iter().map(|r| r.residual().abs()).collect();
        if active {
            checks.push(Check::new(s, "residual ratio over delta", max_ratio(&res), Bound::Below(1.0)));
        }
        if let Some(last) = t.compatibility.last().filter(|_| active) {
            let rel = last.residual().abs() / last.scale().max(1e-300);
            checks.push(Check::new(s, format!("relative residual delta={}", last.delta), rel, Bound::Below(COMPATIBILITY_FINAL)));
        }
        let s = "delta-terms";
        for r in t.delta.iter().filter(|r| active && (r.delta - 0.1).abs() < 1e-12) {
            checks.push(Check::new(s, "cancellation at delta=0.1", r.cancellation(), Bound::Below(DELTA_CANCELLATION)));
        }
        checks.push(Check::new("trace-identity", "relative residual", t.trace_identity, Bound::Below(TRACE_IDENTITY)));
    }
    Ok(Report { title: campaign_title(cfg), checks, notes })
}

fn campaign_title(cfg: &CampaignConfig) -> String {
    format!("verification campaign: {} hmax={} seed={}", cfg.contrast.label(), cfg.hmax, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_ratios() {
        assert!(Bound::Below(1.0).holds(0.5) && !Bound::Below(1.0).holds(1.0));
        assert!(Bound::Between(1.8, 2.2).holds(2.0));
        assert!(max_ratio(&[4.0, 2.0, 1.0]) < 1.0);
        assert!(max_ratio(&[4.0, 2.0, 3.0]) > 1.0);
    }

    #[test]
    fn disk_factor_limits() {
        assert!((disk_trace_factor(Contrast::Unity, 0.5, 1) - 1.0).abs() < 1e-15);
        let k = 1e9;
        let a = disk_trace_factor(Contrast::Finite(k), 0.5, 2);
        assert!((a - disk_trace_factor(Contrast::Conducting, 0.5, 2)).abs() < 1e-8);
        let b = disk_trace_factor(Contrast::Finite(1.0 / k), 0.5, 2);
        assert!((b - disk_trace_factor(Contrast::Insulating, 0.5, 2)).abs() < 1e-8);
    }

    #[test]
    fn gamma_grid_is_well_formed() {
        let g = gamma_metrics().unwrap();
        assert_eq!(g.grid_size, 200);
        assert!(g.closed_form_error < GAMMA_CLOSED_FORM);
        assert!(g.gamma1_min > 0.5 && g.gamma1_max < 1.0 && g.gamma2_min > 1.0);
    }

    #[test]
    fn report_text_is_stable() {
        let r = Report {
            title: "t".into(),
            checks: vec![Check::new("a", "x", 0.5, Bound::Below(1.0)), Check::new("b", "y", 2.0, Bound::Below(1.0))],
            notes: vec![],
        };
        let t = r.to_text();
        assert!(t.contains("[a]") && t.contains("[b]") && t.contains("PASS") && t.contains("FAIL"));
        assert!(t.ends_with("2 checks, 1 failed\n"));
        assert!(!r.passed());
    }
}
