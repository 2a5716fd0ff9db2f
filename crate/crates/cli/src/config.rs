//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use polyshape::geometry::square;
use polyshape::verify::{CampaignConfig, ReconOptions};
use polyshape::{BoundaryFunction, Contrast, MeshOptions, Model, OuterDomain, PerturbationField, Polygon, Vec2};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub experiment: Option<String>,
    pub domain: DomainSection,
    pub polygon: PolygonSection,
    pub contrast: ContrastSection,
    pub current: CurrentSection,
    pub mesh: MeshSection,
    pub perturbation: PerturbationSection,
    pub taylor: TaylorSection,
    pub transmission: TransmissionSection,
    pub verify: VerifySection,
    pub reconstruct: ReconstructSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: None,
            experiment: None,
            domain: DomainSection::default(),
            polygon: PolygonSection::default(),
            contrast: ContrastSection::default(),
            current: CurrentSection::default(),
            mesh: MeshSection::default(),
            perturbation: PerturbationSection::default(),
            taylor: TaylorSection::default(),
            transmission: TransmissionSection::default(),
            verify: VerifySection::default(),
            reconstruct: ReconstructSection::default(),
            base: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSection {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection::Disk { center: [0.0, 0.0], radius: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PolygonSection {
    pub vertices: Vec<[f64; 2]>,
}

impl Default for PolygonSection {
    fn default() -> Self {
        PolygonSection { vertices: square(Vec2::ZERO, 0.3).iter().map(|p| [p.x, p.y]).collect() }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastSection {
    /// `finite`, `insulating`, `conducting` or `unity`.
    pub kind: String,
    pub k: Option<f64>,
}

impl Default for ContrastSection {
    fn default() -> Self {
        ContrastSection { kind: "finite".into(), k: Some(2.0) }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentSection {
    /// Fourier modes written `cos1`, `sin2`, ...
    pub modes: Vec<String>,
    /// CSV `arc_length,value` used instead of `modes`.
    pub file: Option<PathBuf>,
}

impl Default for CurrentSection {
    fn default() -> Self {
        CurrentSection { modes: vec!["cos1".into()], file: None }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub hmax: f64,
    pub grading: f64,
    pub levels: u32,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { hmax: 0.02, grading: 0.5, levels: 5 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    /// `vertex`, `dilation`, `edge` or `file`.
    pub preset: String,
    /// Vertex or edge index for the presets that need one.
    pub index: usize,
    /// Direction for `vertex`; outward from the barycenter when absent.
    pub direction: Option<[f64; 2]>,
    /// CSV `hx,hy`, one row per vertex, for `file`.
    pub file: Option<PathBuf>,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        PerturbationSection { preset: "vertex".into(), index: 0, direction: None, file: None }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorSection {
    pub t: Vec<f64>,
}

impl Default for TaylorSection {
    fn default() -> Self {
        TaylorSection { t: vec![0.08, 0.04, 0.02, 0.01] }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TransmissionSection {
    pub deltas: Vec<f64>,
    pub probe: String,
    pub basis_modes: usize,
}

impl Default for TransmissionSection {
    fn default() -> Self {
        TransmissionSection { deltas: vec![0.4, 0.2, 0.1, 0.05, 0.025], probe: "cos1".into(), basis_modes: 8 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub refinements: usize,
    pub forward_levels: Vec<f64>,
    pub basis_modes: usize,
    pub deltas: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        let c = CampaignConfig::default();
        VerifySection { refinements: c.refinements, forward_levels: c.forward_levels, basis_modes: c.basis_modes, deltas: c.deltas }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSection {
    /// Vertices generating the synthetic data.
    pub truth: Option<Vec<[f64; 2]>>,
    pub noise: f64,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub basis_modes: usize,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        let o = ReconOptions::default();
        ReconstructSection {
            truth: None,
            noise: 0.0,
            max_iterations: o.max_iterations,
            step_tolerance: o.step_tolerance,
            basis_modes: o.basis_modes,
        }
    }
}

fn vec2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

/// `cos3` -> `(3, false)`.
pub fn parse_mode(s: &str) -> Result<(usize, bool), ConfigError> {
    let bad = || ConfigError::Invalid(format!("current mode `{s}` is not of the form cosN or sinN"));
    let (sine, rest) = if let Some(r) = s.strip_prefix("cos") {
        (false, r)
    } else if let Some(r) = s.strip_prefix("sin") {
        (true, r)
    } else {
        return Err(bad());
    };
    let m: usize = rest.parse().map_err(|_| bad())?;
    if m == 0 {
        return Err(bad());
    }
    Ok((m, sine))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Checks everything that can be checked without meshing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.contrast()?;
        self.polygon()?;
        if !(self.mesh.hmax > 0.0) {
            return Err(ConfigError::Invalid(format!("mesh.hmax = {} must be positive", self.mesh.hmax)));
        }
        if !(self.mesh.grading > 0.0 && self.mesh.grading <= 1.0) {
            return Err(ConfigError::Invalid(format!("mesh.grading = {} must lie in (0, 1]", self.mesh.grading)));
        }
        match &self.current.file {
            Some(f) => {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(ConfigError::Invalid(format!("current file {} does not exist", p.display())));
                }
            }
            None => {
                if self.current.modes.is_empty() {
                    return Err(ConfigError::Invalid("current.modes is empty".into()));
                }
                for m in &self.current.modes {
                    parse_mode(m)?;
                }
            }
        }
        parse_mode(&self.transmission.probe)?;
        match self.perturbation.preset.as_str() {
            "vertex" | "dilation" | "edge" => {}
            "file" => {
                let Some(f) = &self.perturbation.file else {
                    return Err(ConfigError::Invalid("perturbation.preset = file needs perturbation.file".into()));
                };
                if !self.resolve(f).is_file() {
                    return Err(ConfigError::Invalid(format!("perturbation file {} does not exist", f.display())));
                }
            }
            other => return Err(ConfigError::Invalid(format!("unknown perturbation preset `{other}`"))),
        }
        if let Some(t) = &self.reconstruct.truth {
            Polygon::new(&t.iter().copied().map(vec2).collect::<Vec<_>>(), &self.omega())
                .map_err(|e| ConfigError::Invalid(format!("reconstruct.truth: {e}")))?;
        }
        Ok(())
    }

    pub fn omega(&self) -> OuterDomain {
        match self.domain {
            DomainSection::Disk { center, radius } => OuterDomain::Disk { center: vec2(center), radius },
            DomainSection::Rectangle { min, max } => OuterDomain::Rectangle { min: vec2(min), max: vec2(max) },
        }
    }

    pub fn vertices(&self) -> Vec<Vec2> {
        self.polygon.vertices.iter().copied().map(vec2).collect()
    }

    pub fn polygon(&self) -> Result<Polygon, ConfigError> {
        Polygon::new(&self.vertices(), &self.omega()).map_err(|e| ConfigError::Invalid(format!("polygon: {e}")))
    }

    pub fn contrast(&self) -> Result<Contrast, ConfigError> {
        match self.contrast.kind.as_str() {
            "finite" => {
                let k = self.contrast.k.ok_or_else(|| ConfigError::Invalid("contrast.k missing".into()))?;
                Contrast::finite(k).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            "insulating" => Ok(Contrast::Insulating),
            "conducting" => Ok(Contrast::Conducting),
            "unity" => Ok(Contrast::Unity),
            other => Err(ConfigError::Invalid(format!("unknown contrast kind `{other}`"))),
        }
    }

    pub fn mesh_options(&self) -> MeshOptions {
        MeshOptions::new(self.mesh.hmax).grading(self.mesh.grading, self.mesh.levels).seed(self.seed)
    }

    pub fn modes(&self) -> Vec<(usize, bool)> {
        self.current.modes.iter().filter_map(|m| parse_mode(m).ok()).collect()
    }

    /// Currents on the model's boundary nodes, with their labels.
    pub fn currents(&self, model: &Model) -> Result<Vec<(String, BoundaryFunction)>, ConfigError> {
        if let Some(f) = &self.current.file {
            let samples = read_samples(&self.resolve(f))?;
            let template = model.fourier(1, false);
            let per = model.omega().boundary_length();
            let v = template.arc_lengths().iter().map(|&s| periodic_interp(&samples, s, per)).collect();
            return Ok(vec![("file".into(), template.with_values(v).mean_normalized())]);
        }
        Ok(self
            .current
            .modes
            .iter()
            .map(|m| {
                let (k, s) = parse_mode(m).expect("validated");
                (m.clone(), model.fourier(k, s))
            })
            .collect())
    }

    pub fn perturbation(&self, poly: &Polygon) -> Result<PerturbationField, ConfigError> {
        let p = &self.perturbation;
        let n = poly.len();
        if p.preset != "dilation" && p.preset != "file" && p.index >= n {
            return Err(ConfigError::Invalid(format!("perturbation.index {} out of range", p.index)));
        }
        Ok(match p.preset.as_str() {
            "vertex" => match p.direction {
                Some(d) => PerturbationField::vertex_motion(n, p.index, vec2(d)),
                None => PerturbationField::vertex_outward(poly, p.index),
            },
            "dilation" => PerturbationField::dilation(poly),
            "edge" => PerturbationField::edge_normal(poly, p.index),
            _ => {
                let path = self.resolve(p.file.as_ref().expect("validated"));
                let rows = read_samples(&path)?;
                if rows.len() != n {
                    return Err(ConfigError::Invalid(format!("{}: expected {n} rows, found {}", path.display(), rows.len())));
                }
                PerturbationField::from_vertex_values(rows.iter().map(|&(x, y)| Vec2::new(x, y)).collect())
            }
        })
    }

    pub fn campaign(&self) -> Result<CampaignConfig, ConfigError> {
        let (m, s) = self.modes().first().copied().unwrap_or((1, false));
        Ok(CampaignConfig {
            omega: self.omega(),
            polygon: self.vertices(),
            contrast: self.contrast()?,
            current: (m, s),
            probe: parse_mode(&self.transmission.probe)?,
            hmax: self.mesh.hmax,
            refinements: self.verify.refinements,
            forward_levels: self.verify.forward_levels.clone(),
            seed: self.seed,
            taylor_t: self.taylor.t.clone(),
            basis_modes: self.verify.basis_modes,
            deltas: self.verify.deltas.clone(),
        })
    }

    pub fn recon_options(&self) -> ReconOptions {
        ReconOptions {
            mesh: self.mesh_options(),
            basis_modes: self.reconstruct.basis_modes,
            max_iterations: self.reconstruct.max_iterations,
            step_tolerance: self.reconstruct.step_tolerance,
            ..ReconOptions::default()
        }
    }

    pub fn truth(&self) -> Option<Vec<Vec2>> {
        self.reconstruct.truth.as_ref().map(|t| t.iter().copied().map(vec2).collect())
    }
}

/// Two-column numeric CSV; a non-numeric first line is taken as a header.
fn read_samples(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() == 2).then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()));
        match parsed {
            Some((Ok(a), Ok(b))) => out.push((a, b)),
            _ if i == 0 => {}
            _ => {
                return Err(ConfigError::Parse { path: path.into(), message: format!("line {}: expected two numbers", i + 1) })
            }
        }
    }
    if out.is_empty() {
        return Err(ConfigError::Parse { path: path.into(), message: "no data rows".into() });
    }
    Ok(out)
}

fn periodic_interp(samples: &[(f64, f64)], s: f64, period: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|&(a, v)| (a.rem_euclid(period), v)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = s.rem_euclid(period);
    let j = pts.partition_point(|p| p.0 <= s);
    let n = pts.len();
    let (a, b) = (pts[(j + n - 1) % n], pts[j % n]);
    let (mut s0, mut s1) = (a.0, b.0);
    if j == 0 {
        s0 -= period;
    }
    if j == n {
        s1 += period;
    }
    if s1 > s0 {
        a.1 + (b.1 - a.1) * (s - s0) / (s1 - s0)
    } else {
        a.1
    }
}
