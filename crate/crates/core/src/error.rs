use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AlignError>;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid alignment path: {0}")]
    InvalidPath(String),

    #[error("infeasible alignment{}: {detail}", stream.as_ref().map(|s| format!(" in stream '{s}'")).unwrap_or_default())]
    Infeasible {
        stream: Option<String>,
        detail: String,
    },

    #[error("enumeration of {i_count}x{j_count} alignments exceeds the size guard (I <= 14, J <= 7)")]
    EnumerationTooLarge { i_count: usize, j_count: usize },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("no scorable rows in ground truth")]
    NoScorableRows,

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("stream '{stream}': {source}")]
    Stream {
        stream: String,
        #[source]
        source: Box<AlignError>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AlignError {
    /// Short machine-parsable class name, printed by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            AlignError::NonFinite(_) => "non_finite",
            AlignError::InvalidParameter(_) => "invalid_parameter",
            AlignError::ShapeMismatch { .. } => "shape_mismatch",
            AlignError::InvalidPath(_) => "invalid_path",
            AlignError::Infeasible { .. } => "infeasible",
            AlignError::EnumerationTooLarge { .. } => "enumeration_too_large",
            AlignError::NotPositiveDefinite(_) => "not_positive_definite",
            AlignError::NonFiniteObjective { .. } => "non_finite_objective",
            AlignError::InvalidAnnotation(_) => "invalid_annotation",
            AlignError::NoScorableRows => "no_scorable_rows",
            AlignError::Synthesis(_) => "synthesis",
            AlignError::Parse { .. } => "parse",
            AlignError::Manifest(_) => "manifest",
            AlignError::Stream { source, .. } => source.class(),
            AlignError::Io { .. } => "io",
        }
    }

    pub(crate) fn in_stream(self, stream: &str) -> AlignError {
        match self {
            AlignError::Infeasible { stream: None, detail } => AlignError::Infeasible {
                stream: Some(stream.to_string()),
                detail,
            },
            e @ AlignError::Infeasible { .. } | e @ AlignError::Stream { .. } => e,
            other => AlignError::Stream {
                stream: stream.to_string(),
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        AlignError::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
