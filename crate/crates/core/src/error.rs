use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("silent frame")]
    SilentFrame,
    #[error("unstable LPC")]
    UnstableLpc,
    #[error("unvoiced frame")]
    Unvoiced,
    #[error("harmonics not found")]
    HarmonicsNotFound,
    #[error("Rd out of model range: {0}")]
    RdOutOfRange(f64),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("no voiced frames")]
    NoVoicedFrames,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid track field `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("wav: {0}")]
    Wav(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<hound::Error> for Error {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => Error::Io(io),
            other => Error::Wav(other.to_string()),
        }
    }
}
