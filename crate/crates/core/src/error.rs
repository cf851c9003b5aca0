use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its invariant.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("simulation diverged at t = {t}: `{field}` is not finite")]
    Divergence { field: &'static str, t: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("filter design error: {0}")]
    Design(String),

    #[error("non-finite input at sample {index}")]
    NonFinite { index: u64 },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// Malformed JSON document, with the path of the offending field.
    #[error("invalid JSON at `{path}`: {source}")]
    JsonAt {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Json(_) | Error::JsonAt { .. } | Error::Calibration(_) | Error::Design(_)
        )
    }
}

/// Deserializes `text`, reporting the path of the first offending field.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let source = e.into_inner();
        if path == "." {
            Error::Json(source)
        } else {
            Error::JsonAt { path, source }
        }
    })
}
