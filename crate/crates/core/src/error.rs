use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("file has no data rows")]
    EmptyFile,

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("non-binary indicator in column {column:?} at row {row}: {value:?}")]
    NonBinaryIndicator {
        column: String,
        row: usize,
        value: String,
    },

    #[error("non-finite value in column {column:?} at row {row}")]
    NonFiniteValue { column: String, row: usize },

    #[error("missing value in column {column:?} at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("cannot parse {value:?} in column {column:?} at row {row}")]
    ParseValue {
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("incompatible nuisance model: {0}")]
    IncompatibleModel(String),

    #[error("empty cell {cell}{}", stratum.as_ref().map(|s| format!(" in stratum {s}")).unwrap_or_default())]
    EmptyCell { cell: String, stratum: Option<String> },

    #[error("no convergence after {iterations} iterations (gradient max-norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("separation detected (positivity violation): cell {cell} has fitted probability {prob:e} < 1e-12")]
    SeparationDetected { cell: String, prob: f64 },

    #[error("rank-deficient design in cell {cell}")]
    RankDeficient { cell: String },

    #[error("covariate pattern not seen at fit time")]
    UnseenStratum,

    #[error("invalid fold count {folds} for n = {n}")]
    InvalidFoldCount { folds: usize, n: usize },

    #[error("no treated units")]
    NoTreatedUnits,

    #[error("positivity violation: unit {unit} has propensity {prob:e} for cell {cell}")]
    PositivityViolation { cell: String, unit: usize, prob: f64 },

    #[error("degenerate time share: mean of T is {0}, must lie in (0.02, 0.98)")]
    DegenerateTimeShare(f64),

    #[error("empty time group: both T = 0 and T = 1 must be observed")]
    EmptyTimeGroup,

    #[error("invalid bootstrap replicate count {0}, need at least 2")]
    InvalidB(usize),

    #[error("bootstrap degenerate: gave up after {attempts} redraws")]
    BootstrapDegenerate { attempts: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario degenerate: {failures} of {reps} replications failed")]
    ScenarioDegenerate { failures: usize, reps: usize },
}

impl Error {
    /// Input and validation problems, as opposed to failures during estimation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::EmptyFile
                | Error::MissingColumn(_)
                | Error::NonBinaryIndicator { .. }
                | Error::NonFiniteValue { .. }
                | Error::MissingValue { .. }
                | Error::ParseValue { .. }
                | Error::InvalidData(_)
                | Error::DimensionMismatch { .. }
                | Error::IncompatibleModel(_)
                | Error::InvalidFoldCount { .. }
                | Error::InvalidB(_)
                | Error::InvalidConfig(_)
                | Error::InvalidScenario(_)
        )
    }
}
