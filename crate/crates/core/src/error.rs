use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by the command line front end to pick an
/// exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("no diagnosis codes configured")]
    NoDiagnosisCodes,

    #[error("unresolved item label {0:?}")]
    UnresolvedLabel(String),

    #[error("ambiguous itemid: label {0:?} matches more than one d_items row")]
    AmbiguousItem(String),

    #[error("demographics missing for hadm_id {0:?}")]
    MissingDemographics(Vec<i64>),

    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },

    #[error("invalid {what}: {reason}")]
    InvalidConfig { what: &'static str, reason: String },

    #[error("column {0} has no observed values")]
    AllMissingColumn(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("class unseeded: no labeled sample for class {0}")]
    ClassUnseeded(usize),

    #[error("degenerate training labels: both classes are required")]
    DegenerateLabels,

    #[error("class {class} has {count} member(s); {folds}-fold stratification needs at least 2 per class")]
    ClassTooSmall { class: usize, count: usize, folds: usize },

    #[error("infeasible synthetic mix: {0}")]
    InfeasibleMix(String),

    #[error("singular linear system")]
    Singular,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NoDiagnosisCodes | Error::InvalidConfig { .. } => ErrorKind::Config,
            Error::Singular | Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
