//! Who sets the controlled platoon's gaps during an evaluation run.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ddpg::DenseNet;
use onramp::rsu::{GapAdvisor, GapChannel, GapRequest, InProcess, RsuService, TrafficSnapshot};
use onramp::sim::World;
use onramp::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Gaps stay at the platoon's default.
    Base,
    /// Gaps advised by the trained actor through the roadside service.
    Rlpg,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Rlpg => "rlpg",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trained actor plus a count of how often it was consulted.
#[derive(Debug)]
pub struct Policy {
    actor: DenseNet,
    invocations: AtomicU64,
}

impl Policy {
    pub fn new(actor: DenseNet) -> Self {
        Self { actor, invocations: AtomicU64::new(0) }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(ddpg::checkpoint::load(path)?.actor))
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::Relaxed)
    }

    /// Roadside service for `scenario`'s controlled platoon.
    pub fn service(&self, scenario: &ScenarioConfig) -> Result<RsuService> {
        let default_gap = scenario.world.platoons.iter().find(|p| p.controlled).map_or(2.0, |p| p.default_gap_m);
        let advisor = GapAdvisor::new(self.actor.clone(), scenario.env, scenario.world.road.speed_limit, default_gap)?;
        Ok(RsuService::new(advisor, TrafficSnapshot::default()))
    }

    /// One advisory round for `platoon_id`: the leader sends its request and
    /// the roadside unit answers from the current traffic picture.
    pub fn advise(&self, service: &RsuService, world: &World, platoon_id: u64, window: f64) -> Result<Vec<f64>> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        service.update_snapshot(TrafficSnapshot::from_world(world, window)?);
        let summary = world.platoon_summary(platoon_id)?;
        let req = GapRequest {
            protocol_version: onramp::rsu::codec::PROTOCOL_VERSION,
            platoon_id,
            leader_position: summary.leader_position,
            leader_speed: summary.leader_speed,
            size: summary.size,
            current_gaps: summary.actual_gaps,
            timestamp: (world.time * 1e6).round() as u64,
        };
        Ok(InProcess(service).request_gaps(&req)?.advised_gaps)
    }
}

/// The policy `mode` calls for; rlpg without a policy is an error.
pub fn require_policy(mode: Mode, policy: Option<&Policy>) -> Result<Option<&Policy>> {
    match (mode, policy) {
        (Mode::Base, _) => Ok(None),
        (Mode::Rlpg, Some(p)) => Ok(Some(p)),
        (Mode::Rlpg, None) => Err(BenchError::MissingCheckpoint),
    }
}
