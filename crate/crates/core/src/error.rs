use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the LP-LLP pipeline.
#[derive(Debug, Error)]
pub enum LlpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error("bag {0} has no instances")]
    EmptyBag(usize),

    #[error("row {0} of the similarity matrix has zero degree (isolated point)")]
    ZeroDegree(usize),

    #[error("non-finite similarity between instances {0} and {1}")]
    NonFiniteSimilarity(usize, usize),

    #[error("linear system (I - alpha S) is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        stage: Stage,
        iterations: usize,
        residual: f64,
    },

    #[error("bag specification cannot be satisfied: positives need {positives_needed}, have {positives_available}; negatives need {negatives_needed}, have {negatives_available}")]
    InfeasibleSpec {
        positives_needed: usize,
        positives_available: usize,
        negatives_needed: usize,
        negatives_available: usize,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Which iterative loop failed to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    AlternatingProjections,
    PowerIteration,
    OuterLoop,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::AlternatingProjections => "alternating projections",
            Stage::PowerIteration => "power iteration",
            Stage::OuterLoop => "LP-LLP outer loop",
        };
        f.write_str(name)
    }
}

pub type Result<T> = std::result::Result<T, LlpError>;

impl LlpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LlpError::Io {
            path: path.into(),
            source,
        }
    }
}
