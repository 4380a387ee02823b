use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by grid construction, data generation, learning and I/O.
#[derive(Debug, Error)]
pub enum EgfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("covariance kernel is ill-conditioned: Cholesky failed with jitter up to {jitter:e}")]
    IllConditionedKernel { jitter: f64 },

    #[error(
        "operator is resonant at theta = {theta}: nearest discrete eigenfrequency is {nearest}"
    )]
    Resonance { theta: f64, nearest: f64 },

    #[error("Green's kernel has a pole at x = s")]
    Pole,

    #[error("matrix of size {n} x {n} exceeds the densification limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{pass} failed: {source}")]
    Pass {
        pass: &'static str,
        #[source]
        source: Box<EgfError>,
    },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("corrupt bundle file {file}: {reason}")]
    CorruptBundle { file: PathBuf, reason: String },

    #[error("unsupported bundle format: {0}")]
    UnsupportedFormat(String),

    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),

    #[error("recipe `{recipe}`: {source}")]
    Recipe {
        recipe: String,
        #[source]
        source: Box<EgfError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl EgfError {
    /// Stable machine-readable identifier for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            EgfError::InvalidArgument(_) => "invalid-argument",
            EgfError::Shape(_) => "shape",
            EgfError::IllConditionedKernel { .. } => "ill-conditioned-kernel",
            EgfError::Resonance { .. } => "resonance",
            EgfError::Pole => "pole",
            EgfError::TooLarge { .. } => "too-large",
            EgfError::Rank(_) => "rank",
            EgfError::Degenerate(_) => "degenerate",
            EgfError::Pass { .. } => "pass-failure",
            EgfError::Numerical(_) => "numerical",
            EgfError::CorruptBundle { .. } => "corrupt-bundle",
            EgfError::UnsupportedFormat(_) => "unsupported-format",
            EgfError::UnknownRecipe(_) => "unknown-recipe",
            EgfError::Recipe { .. } => "recipe",
            EgfError::Io { .. } => "io",
            EgfError::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EgfError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = EgfError> = std::result::Result<T, E>;
