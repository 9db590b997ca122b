use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GraspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("{what} = {value} is outside [-pi/4, pi/4]")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("outlier rejection needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("insufficient points: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("degenerate output: predicted radius {radius:.5} m is below the {floor:.5} m floor")]
    DegenerateOutput { radius: f64, floor: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("no consensus: best inlier fraction {best_fraction:.3} below required {required:.3}")]
    NoConsensus { best_fraction: f64, required: f64 },

    #[error("hough accumulator peak has {peak} votes, need at least {required}")]
    EmptyAccumulator { peak: u32, required: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing checkpoint for the learned estimator")]
    MissingCheckpoint,

    #[error("unknown report format `{0}`")]
    UnknownFormat(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GraspError {
    /// Stable short name used when tallying failures in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            GraspError::OutOfRange { .. } => "out_of_range",
            GraspError::TooFewPoints { .. } => "too_few_points",
            GraspError::InsufficientPoints { .. } => "insufficient_points",
            GraspError::DegenerateOutput { .. } => "degenerate_output",
            GraspError::Degenerate(_) => "degenerate",
            GraspError::NoConsensus { .. } => "no_consensus",
            GraspError::EmptyAccumulator { .. } => "empty_accumulator",
            GraspError::ShapeMismatch(_) => "shape_mismatch",
            GraspError::EmptyDataset => "empty_dataset",
            GraspError::LengthMismatch { .. } => "length_mismatch",
            GraspError::InvalidArgument(_) => "invalid_argument",
            GraspError::MissingCheckpoint => "missing_checkpoint",
            GraspError::UnknownFormat(_) => "unknown_format",
            GraspError::Parse { .. } => "parse",
            GraspError::Io { .. } => "io",
            GraspError::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GraspError::Io {
            path: path.into(),
            source,
        }
    }
}
