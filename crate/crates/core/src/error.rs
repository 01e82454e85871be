use std::path::PathBuf;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {detail}")]
    Parameter { name: &'static str, detail: String },

    #[error("sampler configuration invalid: {0}")]
    Config(String),

    #[error("ensemble diverged: particle {particle} became non-finite by step {step}")]
    Divergence { particle: usize, step: u64 },

    #[error("drift integrator produced a non-finite value (step too large for the drift stiffness)")]
    Unstable,

    #[error("rejection envelope violated at x = {x:?} (acceptance ratio {ratio})")]
    EnvelopeViolation { x: Vec<f64>, ratio: f64 },

    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("density grids do not match: {0}")]
    GridMismatch(String),

    #[error("boundary mass {mass:e} exceeds tolerance {tolerance:e}")]
    BoundaryMass { mass: f64, tolerance: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("{path}:{line}: malformed {field}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        detail: String,
    },

    #[error("experiment failed at tau = {tau}: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter { .. } => "parameter",
            Error::Config(_) => "config",
            Error::Divergence { .. } => "divergence",
            Error::Unstable => "unstable",
            Error::EnvelopeViolation { .. } => "envelope",
            Error::NotPositiveDefinite(_) => "covariance",
            Error::Degenerate(_) => "degenerate",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::BoundaryMass { .. } => "boundary-mass",
            Error::Unknown { .. } => "unknown",
            Error::Parse { .. } => "parse",
            Error::AtTau { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
