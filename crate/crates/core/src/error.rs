use thiserror::Error;

#[derive(Debug, Error)]
pub enum PaccError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("validation failed for field `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("time {t} outside segment [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },

    /// `pair` k is vehicle k-1 followed by vehicle k (1-based pair numbering
    /// matching the trace columns); `None` when raised outside a fleet.
    #[error("collision{} (gap {gap} m)", pair.map(|k| format!(" in pair {k}")).unwrap_or_default())]
    Collision { pair: Option<usize>, gap: f64 },

    #[error("no feasible point found (max violation {violation})")]
    Infeasible { violation: f64 },

    #[error("metric undefined for pair {pair}: every sample excluded")]
    MetricUndefined { pair: usize },

    #[error("degenerate demonstrations: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PaccError>;

impl PaccError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PaccError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        PaccError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
