//! Space-time grids around the merge and service latency measurements.

use std::io::Write;

use onramp::rsu::codec::PROTOCOL_VERSION;
use onramp::rsu::{latency_cdf, GapRequest, LatencyCdf, TrafficSnapshot};
use onramp::sim::{Band, SpaceTimeGrid};
use onramp::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::episode::{run_episode, EvalOptions, SpaceTimeSpec};
use crate::error::{setting, Result};
use crate::policy::{require_policy, Mode, Policy};

#[derive(Debug, Clone)]
pub struct SpaceTimeRun {
    pub mode: Mode,
    pub grid: SpaceTimeGrid,
    /// Cells whose mean speed is below the congestion speed.
    pub cells_below: usize,
    pub band: Option<Band>,
}

/// Space-time grid over the 200 m merge area for one seeded run.
pub fn spacetime(scenario: &ScenarioConfig, seed: u64, mode: Mode, policy: Option<&Policy>) -> Result<SpaceTimeRun> {
    let policy = require_policy(mode, policy)?;
    let opts = EvalOptions { spacetime: Some(SpaceTimeSpec::merge_area(scenario)), ..Default::default() };
    let grid = run_episode(scenario, seed, policy, &opts)?.grid.expect("grid requested");
    let threshold = scenario.env.reward.v_congestion;
    Ok(SpaceTimeRun { mode, cells_below: grid.cells_below(threshold), band: grid.largest_band(threshold), grid })
}

/// `n` random valid requests against `policy`'s service; returns the
/// server-side compute delays (µs) in request order.
pub fn measure_latency(scenario: &ScenarioConfig, policy: &Policy, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(setting("n", "need at least one request"));
    }
    let service = policy.service(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_max = scenario.env.n_max;
    let limit = scenario.world.road.speed_limit;
    for id in 0..n as u64 {
        service.update_snapshot(TrafficSnapshot {
            density_mainline: rng.random_range(0.0..60.0),
            density_ramp: rng.random_range(0.0..60.0),
            mean_speed_mainline: rng.random_range(0.0..limit),
            mean_speed_ramp: rng.random_range(0.0..limit),
        });
        let size = rng.random_range(2..=n_max);
        let req = GapRequest {
            protocol_version: PROTOCOL_VERSION,
            platoon_id: id,
            leader_position: rng.random_range(0.0..scenario.world.road.segment_length),
            leader_speed: rng.random_range(0.0..limit),
            size,
            current_gaps: (1..size).map(|_| rng.random_range(2.0..30.0)).collect(),
            timestamp: id,
        };
        service.handle(&req)?;
    }
    Ok(service.latency_log().into_iter().map(|(_, d)| d).collect())
}

pub fn write_latency_log<W: Write>(out: W, delays: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["request_id", "compute_delay_us"])?;
    for (i, d) in delays.iter().enumerate() {
        w.write_record([i.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn latency_summary(delays: &[f64]) -> Result<LatencyCdf> {
    Ok(latency_cdf(delays)?)
}
