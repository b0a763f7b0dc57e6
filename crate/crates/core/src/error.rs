use thiserror::Error;

/// Errors raised by the data, imputation, PCA, merge and model layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feature name must be non-empty")]
    EmptyFeatureName,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("feature `{0}` is not present in the target feature set")]
    UnknownTarget(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("label mismatch: {0}")]
    LabelKindMismatch(String),
    #[error("column `{0}` has no observed cells")]
    AllMissingColumn(String),
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("matrix contains missing cells: {0}")]
    HasMissing(String),
    #[error("requested {requested} components but at most {max} are available")]
    DegenerateRank { requested: usize, max: usize },
    #[error("design matrix is rank deficient (condition ratio {0:e})")]
    RankDeficient(f64),
    #[error("only one class present in training labels")]
    SingleClass,
    #[error("training loss increased at epoch {epoch}: {previous} -> {current}")]
    LossIncreased {
        epoch: usize,
        previous: f64,
        current: f64,
    },
    #[error("repeat {index} failed: {source}")]
    RepeatFailed { index: usize, source: Box<Error> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
