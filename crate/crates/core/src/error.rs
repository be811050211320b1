use std::path::PathBuf;

use thiserror::Error;

use crate::vec3::Point;

/// Errors raised by the laboratory. Each variant names the failing stage so
/// the CLI can surface it without further context.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid resolution: {what} = {value}")]
    InvalidResolution { what: &'static str, value: i64 },

    #[error("ambiguous boundary projection for point {point:?}")]
    AmbiguousProjection { point: Point },

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Point },

    #[error("cone violation: delta = {delta} must lie in (0, {max})")]
    ConeViolation { delta: f64, max: f64 },

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("degenerate mesh: tet {tet} has volume {volume:e}")]
    DegenerateMesh { tet: usize, volume: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid conductivity: {0}")]
    InvalidConductivity(String),

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("near-resonant Schrödinger system (condition estimate {condition:e})")]
    Resonance { condition: f64 },

    #[error("spectral solver failure: {0}")]
    SpectralFailure(String),

    #[error("{what} = {value} is out of range [{min}, {max}]")]
    Range {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("kernel evaluated at its pole")]
    Singularity,

    #[error("matrix field is not uniformly elliptic: {0}")]
    Ellipticity(String),

    #[error("pole at {pole:?} is not exterior (distance to closed domain {distance:e})")]
    PolePlacement { pole: Point, distance: f64 },

    #[error("scale k = {k} unresolvable: {reason}")]
    UnresolvableScale { k: u32, reason: String },

    #[error("degenerate datum: reference pairing {0:e} too small")]
    DegenerateDatum(f64),

    #[error("usage: {0}")]
    Usage(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {path:?} line {line}: {message}")]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<LabError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Innermost error, below any stage wrappers.
    pub fn root(&self) -> &LabError {
        match self {
            LabError::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

/// Tags errors with the pipeline stage that produced them.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<LabError>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e.into() {
            e @ LabError::Stage { .. } => e,
            e => LabError::Stage { stage, source: Box::new(e) },
        })
    }
}
