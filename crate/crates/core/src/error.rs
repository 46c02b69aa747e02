use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid gap: {0} m")]
    InvalidGap(f64),
    #[error("unknown vehicle {0}")]
    UnknownVehicle(u64),
    #[error("target lane {0} does not exist or is not legal here")]
    IllegalLane(usize),
    #[error("invalid config `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("platoon requires >= 2 members, got {0}")]
    PlatoonTooSmall(usize),
    #[error("gap vector length mismatch: expected {expected}, got {got}")]
    GapLengthMismatch { expected: usize, got: usize },
    #[error("unknown platoon {0}")]
    UnknownPlatoon(u64),
    #[error("scenario has no controlled platoon")]
    NoControlledPlatoon,
    #[error("episode finished")]
    EpisodeFinished,
    #[error("controlled platoon was never formed within {0} s")]
    PlatoonNeverFormed(f64),
    #[error("window must be positive, got {0}")]
    NonPositiveWindow(f64),
    #[error(transparent)]
    Agent(#[from] ddpg::DdpgError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error at line {line}, column {column} (`{key}`): {message}")]
    ConfigParse { key: String, line: usize, column: usize, message: String },
    #[error("platoon of {size} exceeds the {n_max} members the observation can hold")]
    PlatoonTooLarge { size: usize, n_max: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
