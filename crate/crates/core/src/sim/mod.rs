//! Microscopic simulation of the merge segment.

pub mod idm;
pub mod lane_change;
pub mod metrics;
pub mod road;
pub mod spacetime;
pub mod trace;
pub mod vehicle;
pub mod world;

pub use idm::{car_following_accel, IdmParams};
pub use lane_change::{Direction, LaneChangeParams, TargetGap};
pub use metrics::{measure, measure_metrics, SegmentMetrics};
pub use road::RoadNetwork;
pub use spacetime::{space_time_grid, Band, SpaceTimeGrid};
pub use trace::{Trace, TraceRow};
pub use vehicle::{Vehicle, VehicleKind};
pub use world::{Counters, ExitRecord, FlowSpec, World, WorldConfig};
