use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("rlpg mode needs a checkpoint (--checkpoint)")]
    MissingCheckpoint,
    #[error("invalid experiment setting `{key}`: {reason}")]
    Setting { key: String, reason: String },
    #[error(transparent)]
    Sim(#[from] onramp::SimError),
    #[error(transparent)]
    Rsu(#[from] onramp::rsu::RsuError),
    #[error(transparent)]
    Agent(#[from] ddpg::DdpgError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

pub(crate) fn setting(key: &str, reason: impl Into<String>) -> BenchError {
    BenchError::Setting { key: key.into(), reason: reason.into() }
}
