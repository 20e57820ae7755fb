use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why the likelihood equations produced no usable root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootFailure {
    /// No start reached the residual tolerance.
    Residual,
    /// The only root lies on `β = α̂_H`.
    Boundary,
}

impl RootFailure {
    fn describe(self, residual: f64) -> String {
        match self {
            RootFailure::Residual => format!("residual {residual:e}"),
            RootFailure::Boundary => "the only root found lies on the beta = Hill alpha boundary".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={n}")]
    Index { index: usize, n: usize },

    /// Bad input data; `line` is 1-based when the data came from a file.
    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, message: String },

    #[error("infinite mean: tail index estimate {alpha} is not above 1")]
    InfiniteMean { alpha: f64 },

    #[error("undefined mean: requires beta > alpha > 1, got alpha = {alpha}, beta = {beta}")]
    UndefinedMean { alpha: f64, beta: f64 },

    /// All top-k log-spacings vanish, so no tail index can be estimated.
    #[error("degenerate tail: all {k} upper log-spacings are zero")]
    DegenerateTail { k: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("singular: alpha and beta coincide ({0})")]
    Singular(f64),

    #[error("no convergence after {iterations} iterations ({})", cause.describe(*residual))]
    NonConvergence { iterations: usize, residual: f64, cause: RootFailure },

    /// A root with `β` next to `α`: `ĉ` and `d̂` diverge with opposite signs.
    #[error("second-order term not identified: beta = {beta} is within 1% of alpha = {alpha}")]
    Unidentified { alpha: f64, beta: f64 },

    #[error("invalid estimate: {0}")]
    InvalidEstimate(String),

    #[error("sample size {n} outside [{min}, {max}]")]
    Size { n: usize, min: usize, max: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data { line, message: msg.into() }
    }

    /// True for failures of the numerical estimation itself, as opposed to
    /// bad arguments or bad data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InfiniteMean { .. }
                | Error::UndefinedMean { .. }
                | Error::DegenerateTail { .. }
                | Error::DegenerateModel(_)
                | Error::Singular(_)
                | Error::NonConvergence { .. }
                | Error::Unidentified { .. }
                | Error::InvalidEstimate(_)
                | Error::DegenerateData(_)
        )
    }
}
