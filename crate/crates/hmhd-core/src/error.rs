use thiserror::Error;

#[derive(Debug, Error)]
pub enum HmhdError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solution lost regularity at t = {t}: {what}")]
    Blowup { t: f64, what: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

impl HmhdError {
    pub fn invalid(msg: impl Into<String>) -> HmhdError {
        HmhdError::Invalid(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> HmhdError {
        HmhdError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, HmhdError>;
