use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
///
/// Variants fall into two families that callers (notably the command line)
/// map to different exit codes: data problems ([`Error::is_validation`]) and
/// configuration problems (everything else).
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate participant_id {id:?} at records {first} and {second}")]
    DuplicateId { id: String, first: usize, second: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("missing item score at index {0}")]
    MissingScore(usize),

    #[error("design matrix is singular (rank deficient)")]
    SingularDesign,

    #[error("underdetermined fit: need more than {needed} observations, got {got}")]
    Underdetermined { needed: usize, got: usize },

    #[error("zero-variance column {0}")]
    DegenerateColumn(String),

    #[error("correlation undefined: zero variance")]
    UndefinedCorrelation,

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("explainer {explainer} does not support {model}")]
    WrongExplainer { explainer: &'static str, model: String },

    #[error("fold failure at repeat {repeat}, fold {fold}: {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("estimator failed on feature subset {subset:?}: {source}")]
    Subset {
        subset: Vec<String>,
        #[source]
        source: Box<Error>,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the data rather than by how the run was configured.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::DuplicateId { .. }
            | Error::Validation(_)
            | Error::MissingScore(_)
            | Error::SingularDesign
            | Error::Underdetermined { .. }
            | Error::DegenerateColumn(_)
            | Error::UndefinedCorrelation
            | Error::SingleClass
            | Error::DimensionMismatch { .. }
            | Error::Domain(_)
            | Error::Json(_)
            | Error::Precondition(_) => true,
            Error::Fold { source, .. } | Error::Subset { source, .. } => source.is_validation(),
            Error::Config(_) | Error::WrongExplainer { .. } => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
