//! Deep deterministic policy gradient on plain `f64` vectors.
//!
//! The crate carries everything the training loop needs: dense networks with
//! hand-written backprop ([`net`]), Adam ([`adam`]), a ring replay buffer
//! ([`replay`]), Ornstein–Uhlenbeck exploration ([`noise`]), the agent update
//! rules ([`agent`]), the episodic loop ([`train`]) and binary checkpoints
//! ([`checkpoint`]).

pub mod adam;
pub mod agent;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod net;
pub mod noise;
pub mod replay;
pub mod toy;
pub mod train;

pub use agent::{select_action, Agent, DdpgConfig};
pub use error::{DdpgError, Result};
pub use net::{Activation, DenseNet, ForwardCache, Gradients, Init};
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate, train, Environment, EpisodeRecord, RewardLog, Step, TrainConfig};
