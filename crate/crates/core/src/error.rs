use thiserror::Error;

/// Every failure the toolkit reports. Variants carry enough context to print a
/// useful diagnostic without a backtrace.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polygon has fewer than 3 vertices ({0})")]
    TooFewVertices(usize),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("vertex {0} is collinear with its neighbours")]
    CollinearVertex(usize),
    #[error("polygon is not strictly inside the outer domain")]
    NotInsideOuterDomain,
    #[error("buffer quadrangle {0} is not convex")]
    NonconvexQuadrangle(usize),
    #[error("clearance too small to build buffer polygons")]
    ClearanceTooSmall,
    #[error("perturbation degenerates the polygon: {0}")]
    DegeneratePerturbation(String),
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("invalid angle {0}")]
    InvalidAngle(f64),
    #[error("contrast k = 1 is not a transmission problem")]
    ContrastUnity,
    #[error("invalid contrast: {0}")]
    InvalidContrast(String),
    #[error("eigenspace at gamma = {0} is two-dimensional")]
    DegenerateEigenspace(f64),
    #[error("gamma = {0} is not an eigenvalue")]
    NotAnEigenvalue(f64),
    #[error("singular system for vertex {0}")]
    SingularSystem(usize),
    #[error("boundary current has nonzero mean {0:e}")]
    NonZeroMeanCurrent(f64),
    #[error("linear solver failed: {0}")]
    SolverDivergence(String),
    #[error("incompatible jump data, residual {0:e}")]
    IncompatibleData(f64),
    #[error("operation requires a mesh with duplicated interface nodes")]
    RequiresDuplicatedMesh,
    #[error("field and mesh do not match")]
    MeshMismatch,
    #[error("corner coefficient for vertex {0} missing")]
    MissingBeta(usize),
    #[error("vertex {vertex}: only {layers} mesh layers inside the probe radius")]
    InsufficientResolution { vertex: usize, layers: usize },
    #[error("Jacobian rank deficient (damping {0:e})")]
    JacobianRankDeficient(f64),
    #[error("iterate polygon invalid: {0}")]
    InvalidIterate(String),
    #[error("operation not available for this contrast: {0}")]
    UnsupportedContrast(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
