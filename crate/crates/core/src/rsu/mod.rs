//! Roadside gap-advisory service and the platoon leader's client.

pub mod codec;
pub mod latency;
pub mod service;

pub use codec::{decode_message, encode_message, CodecError, ErrorReply, GapRequest, GapResponse, Message};
pub use latency::{latency_cdf, LatencyCdf};
pub use service::{
    serve, spawn_server, GapAdvisor, GapChannel, InProcess, RsuError, RsuService, TcpClient, TrafficSnapshot,
};
