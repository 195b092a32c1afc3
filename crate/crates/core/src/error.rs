use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the simulator can report.
///
/// Each variant maps onto a stable category string and numeric code so the
/// CLI and the C bindings can report errors without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("post-selection is orthogonal to the pre-selected state (overlap {overlap:e})")]
    OrthogonalPostselection { overlap: f64 },

    #[error("numerical accuracy not reached in {what}: estimated relative error {estimate:e}")]
    Accuracy { what: String, estimate: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("AT splitting unresolved: found {peaks} transparency peak(s), need exactly 2")]
    UnresolvedSplitting { peaks: usize },

    #[error("argument outside validated domain: {0}")]
    Domain(String),

    #[error("no linear region found (best R^2 = {r_squared:.6})")]
    FitFailure { r_squared: f64 },

    #[error("feedback loop unstable with gains kp={kp}, ki={ki}, kd={kd}")]
    Instability { kp: f64, ki: f64, kd: f64 },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation failed for `{key}`: {message}")]
    ConfigValidation { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::OrthogonalPostselection { .. } => "orthogonal_postselection",
            Error::Accuracy { .. } => "accuracy",
            Error::Precondition(_) => "precondition",
            Error::UnresolvedSplitting { .. } => "unresolved_splitting",
            Error::Domain(_) => "domain",
            Error::FitFailure { .. } => "fit_failure",
            Error::Instability { .. } => "instability",
            Error::ConfigParse { .. } => "config_parse",
            Error::ConfigValidation { .. } => "config_validation",
            Error::Io(_) => "io",
            Error::Serialization(_) => "serialization",
        }
    }

    /// Stable numeric code, shared with the C ABI status enum.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::InvalidParameter { .. } => 2,
            Error::OrthogonalPostselection { .. } => 3,
            Error::Accuracy { .. } => 4,
            Error::Precondition(_) => 5,
            Error::UnresolvedSplitting { .. } => 6,
            Error::Domain(_) => 7,
            Error::FitFailure { .. } => 8,
            Error::Instability { .. } => 9,
            Error::Io(_) => 10,
            Error::ConfigParse { .. } => 11,
            Error::ConfigValidation { .. } => 12,
            Error::Serialization(_) => 13,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

/// Rejects NaN and infinities with a parameter-naming error.
pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be >= 0, got {value}")))
    }
}
