use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid angular extent: expected 9x9 views, got {views_v}x{views_u}")]
    BadAngularExtent { views_v: usize, views_u: usize },

    #[error("invalid input for {context}: {reason}")]
    InvalidInput { context: &'static str, reason: String },

    #[error("scene '{0}' is too short: patch extraction needs at least 5 frames and 32x32 pixels")]
    SceneTooSmall(String),

    #[error("non-finite value detected in {context} at step {step}")]
    NonFinite { context: String, step: usize },

    #[error("training diverged at step {step}: loss = {loss}; diagnostics written to {dump:?}")]
    Diverged {
        step: u64,
        loss: f64,
        dump: Option<PathBuf>,
    },

    #[error("scene '{0}' already exists (pass force to overwrite)")]
    SceneExists(String),

    #[error("scene '{0}' not found in manifest")]
    SceneNotFound(String),

    #[error("split '{0}' is empty")]
    EmptySplit(String),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("PFM parse error at byte {offset} in {path:?}: {reason}")]
    PfmParse {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("manifest error in {path:?} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("checkpoint error in {path:?}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("reassembly coverage gap: {uncovered} pixels have no prediction (first at y={y}, x={x})")]
    CoverageGap { uncovered: usize, y: usize, x: usize },

    #[error("empty evaluation mask")]
    EmptyMask,

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path:?}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code per the CLI contract: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput { .. } => 1,
            Error::NonFinite { .. } | Error::Diverged { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
