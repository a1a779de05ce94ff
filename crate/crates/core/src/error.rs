use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit. Every variant is an input or contract
/// violation except `Io`, `Json`, `Csv` and `SolverNonConvergence`.
#[derive(Debug, Error)]
pub enum DoseError {
    #[error("manifest not found: {0}")]
    MissingManifest(PathBuf),
    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("role mismatch: expected {expected}, found {found}")]
    RoleMismatch { expected: String, found: String },
    #[error("table too small: {0}")]
    TableTooSmall(String),
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("statistic `{0}` has zero spread; bandwidth would be zero")]
    DegenerateStatistic(String),
    #[error("bandwidth must be positive and finite, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is rank deficient along {} direction(s)", .0.len())]
    RankDeficient(Vec<usize>),
    #[error("SMO did not converge within {0} iterations")]
    SolverNonConvergence(usize),
    #[error("statistic `{0}` needs at least two ensemble members")]
    NeedsEnsemble(String),
    #[error("window length {window} does not divide {len} values")]
    BadWindowing { len: usize, window: usize },
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("score vector is empty")]
    EmptyScores,
    #[error("orientation or method mismatch: {0}")]
    OrientationMismatch(String),
    #[error("bin count must be at least 2, got {0}")]
    BadBinCount(usize),
    #[error("bad parameter: {0}")]
    BadParams(String),
    #[error("u = {0} lies outside the support of the density of states")]
    OutOfSupport(f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl DoseError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            DoseError::MissingManifest(_) => "MissingManifest",
            DoseError::DuplicateSampleId(_) => "DuplicateSampleId",
            DoseError::NonFiniteValue { .. } => "NonFiniteValue",
            DoseError::SchemaMismatch(_) => "SchemaMismatch",
            DoseError::RoleMismatch { .. } => "RoleMismatch",
            DoseError::TableTooSmall(_) => "TableTooSmall",
            DoseError::UnknownStatistic(_) => "UnknownStatistic",
            DoseError::UnknownModel(_) => "UnknownModel",
            DoseError::DegenerateStatistic(_) => "DegenerateStatistic",
            DoseError::NonPositiveBandwidth(_) => "NonPositiveBandwidth",
            DoseError::DimensionMismatch { .. } => "DimensionMismatch",
            DoseError::RankDeficient(_) => "RankDeficient",
            DoseError::SolverNonConvergence(_) => "SolverNonConvergence",
            DoseError::NeedsEnsemble(_) => "NeedsEnsemble",
            DoseError::BadWindowing { .. } => "BadWindowing",
            DoseError::EmptyEvaluationSet => "EmptyEvaluationSet",
            DoseError::EmptyScores => "EmptyScores",
            DoseError::OrientationMismatch(_) => "OrientationMismatch",
            DoseError::BadBinCount(_) => "BadBinCount",
            DoseError::BadParams(_) => "BadParams",
            DoseError::OutOfSupport(_) => "OutOfSupport",
            DoseError::Io { .. } => "Io",
            DoseError::Json(_) => "Json",
            DoseError::Csv(_) => "Csv",
        }
    }

    /// True for errors caused by bad input rather than an internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, DoseError::SolverNonConvergence(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DoseError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DoseError>;
