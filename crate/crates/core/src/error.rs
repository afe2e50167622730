use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("spectrum peak lies at the grid edge")]
    Edge,

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("histogram shape error: {0}")]
    Shape(String),

    #[error("estimator undefined: {0}")]
    Estimator(String),

    #[error("curve does not cross g2 = {bound} on the {side} side of the peak")]
    UnboundedRange { bound: f64, side: &'static str },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input (config or scenario parameters).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Parse(_))
            || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}
