use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the knowledge base and its pipelines.
///
/// Variants fall in two broad groups that the CLI maps to different exit
/// codes: query errors (unknown identifiers, missing prerequisites) and
/// input-format errors (malformed files, schema violations).
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),

    #[error("conflicting write at ({language}, {feature}, {source_name}): stored {existing}, incoming {incoming}")]
    ConflictingWrite { language: String, feature: String, source_name: String, existing: f64, incoming: f64 },
    #[error("registry conflict for `{0}`: re-registered with different metadata")]
    RegistryConflict(String),
    #[error("invalid language record `{0}`: {1}")]
    InvalidLanguage(String, String),
    #[error("invalid feature name `{0}`: {1}")]
    InvalidFeatureName(String, String),
    #[error("invalid source name `{0}`")]
    InvalidSourceName(String),
    #[error("invalid cell value {0}: must be finite")]
    InvalidValue(f64),

    #[error("category `{observed}` is not one of the declared categories of `{feature}`")]
    UnknownCategory { feature: String, observed: String },
    #[error("level {observed} out of range 0..={max_level} for `{feature}`")]
    LevelOutOfRange { feature: String, max_level: u32, observed: u32 },
    #[error("nominal feature `{0}` needs at least two categories")]
    TooFewCategories(String),
    #[error("inference rules form a cycle through `{0}`")]
    CyclicRules(String),
    #[error("invalid inference rule {from} -> {to}: {reason}")]
    InvalidRule { from: String, to: String, reason: String },
    #[error("name collision: `{first}` and `{second}` both canonicalize to `{canonical}`")]
    NameCollision { canonical: String, first: String, second: String },
    #[error("cannot resolve language identifier `{0}`")]
    UnresolvableId(String),

    #[error("source subset is empty")]
    EmptySourceSubset,
    #[error("matrix aggregation mode {matrix} does not match requested {requested}")]
    ModeMismatch { matrix: String, requested: String },
    #[error("feature list is empty")]
    EmptyFeatureList,
    #[error("feature `{0}` listed twice")]
    DuplicateFeature(String),
    #[error("feature scope is empty")]
    EmptyScope,
    #[error("language `{0}` has no sourced features in scope")]
    NoSourcedFeatures(String),
    #[error("no cached quality run for {method} ({mode})")]
    MissingQualityRun { method: String, mode: String },

    #[error("matrix has no observed values")]
    EmptyMatrix,
    #[error("invalid imputer parameter: {0}")]
    InvalidParameter(String),
    #[error("external imputation does not cover ({language}, {feature})")]
    IncompleteExternal { language: String, feature: String },

    #[error("too few observed cells: have {have}, need {need}")]
    TooFewObserved { have: usize, need: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("{path}:{line}: {message}")]
    Format { path: String, line: u64, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, message: message.into() }
    }

    /// True for errors caused by malformed input files rather than by a
    /// well-formed query against missing data.
    pub fn is_input_format(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io { .. }
                | Error::InvalidValue(_)
                | Error::InvalidFeatureName(..)
                | Error::InvalidLanguage(..)
                | Error::InvalidSourceName(_)
                | Error::UnknownCategory { .. }
                | Error::LevelOutOfRange { .. }
                | Error::TooFewCategories(_)
                | Error::CyclicRules(_)
                | Error::InvalidRule { .. }
                | Error::NameCollision { .. }
                | Error::UnresolvableId(_)
                | Error::ConflictingWrite { .. }
                | Error::RegistryConflict(_)
                | Error::IncompleteExternal { .. }
        )
    }
}
