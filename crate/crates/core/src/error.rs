use thiserror::Error;

/// Errors raised across the testing framework.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A mathematical quantity was requested outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration value (significance level, budget, epsilon, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition, e.g. an unclipped probability
    /// reaching the statistic.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed input data. `row` is 1-based and counts the header when the
    /// data came from a file.
    #[error("data error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Data { row: Option<usize>, message: String },

    /// Classifier could not be initialized.
    #[error("initialization error: {0}")]
    Initialization(String),

    /// No unqueried item is left to select.
    #[error("pool exhausted: {0}")]
    PoolExhausted(String),

    /// The label oracle could not answer.
    #[error("oracle failure: {0}")]
    Oracle(String),

    /// An estimate could not be formed from the given inputs.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A divergence is infinite (support mismatch).
    #[error("infinite divergence: {0}")]
    InfiniteDivergence(String),

    /// The linear program has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Inputs are degenerate for the requested computation.
    #[error("degenerate inputs: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data {
            row: None,
            message: message.into(),
        }
    }

    pub(crate) fn data_at(row: usize, message: impl Into<String>) -> Self {
        Error::Data {
            row: Some(row),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
