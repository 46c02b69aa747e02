//! On-ramp merging simulator, platoon gap control, the merge MDP and the
//! roadside gap-advisory service.

pub mod config;
pub mod env;
pub mod error;
pub mod platoon;
pub mod rsu;
pub mod sim;

pub use config::ScenarioConfig;
pub use env::{EnvConfig, MergeEnv, RewardConfig};
pub use error::{Result, SimError};
