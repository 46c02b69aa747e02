//! Experiment harness for the gap-advisory policy: training, base/rlpg
//! comparisons, parameter sweeps, space-time grids and service latency.

pub mod episode;
pub mod error;
pub mod experiments;
pub mod policy;
pub mod probes;
pub mod training;

pub use episode::{run_episode, EpisodeOutcome, EvalOptions, SpaceTimeSpec};
pub use error::{BenchError, Result};
pub use experiments::{motivation, run_sweep, SweepKind, SweepResult, SweepSpec};
pub use policy::{Mode, Policy};
pub use training::{train_policy, TrainOptions};
