use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A model, policy, map or configuration violates one of its invariants.
    /// `field` names the offending location, e.g. `transitions[2][1]`.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("discount factor {name} = {value} is outside {range}")]
    Discount {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A bound or theorem check failed while a campaign was running.
    #[error("invariant violated ({what}) at trial {trial}, seed {seed}")]
    Invariant {
        what: String,
        trial: usize,
        seed: u64,
    },
}

impl Error {
    /// Whether the failure came from reading or writing a file.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Reject discount factors outside `[0, 1)`.
pub(crate) fn check_discount(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Discount {
            name,
            value,
            range: "[0, 1)",
        })
    }
}
