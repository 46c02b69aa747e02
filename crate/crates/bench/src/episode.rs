//! A single evaluation run: warm-up, platoon arrival, then a fixed window
//! of measurement.

use onramp::sim::{measure_metrics, space_time_grid, SpaceTimeGrid, World};
use onramp::{ScenarioConfig, SimError};

use crate::error::Result;
use crate::policy::Policy;

/// Speed samples averaged before the platoon forms.
pub const PRE_ARRIVAL_SPAN: f64 = 60.0;
/// Trailing span used for [`EpisodeOutcome::tail_speed`].
pub const TAIL_SPAN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeSpec {
    /// Mainline stretch covered (m).
    pub region: (f64, f64),
    pub cell_length: f64,
    pub cell_duration: f64,
}

impl SpaceTimeSpec {
    /// 200 m around the merge zone: 50 m upstream of its start to 150 m past it.
    pub fn merge_area(scenario: &ScenarioConfig) -> Self {
        let start = scenario.world.road.merge_zone_start;
        Self { region: (start - 50.0, start + 150.0), cell_length: 10.0, cell_duration: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Measurement window after the platoon forms (s).
    pub window: f64,
    pub spacetime: Option<SpaceTimeSpec>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { window: 180.0, spacetime: None }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub seed: u64,
    /// Time-averaged mean segment speed over the window (m/s).
    pub mean_speed: f64,
    /// Mean over vehicles that left during the window of their average
    /// speed on the segment (m/s).
    pub trip_speed: f64,
    pub mean_speed_mainline: f64,
    /// Exits per hour during the window.
    pub throughput: f64,
    pub pre_arrival_speed: f64,
    pub tail_speed: f64,
    pub formed_at: f64,
    /// When the platoon's last member left, if inside the window.
    pub cleared_at: Option<f64>,
    pub guard_interventions: u64,
    pub conserved: bool,
    /// Covers world time from 0 to the end of the window.
    pub grid: Option<SpaceTimeGrid>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Run `scenario` with flow seed `seed`. With `policy` the controlled
/// platoon's gaps are advised once per decision interval; without it they
/// stay at the default.
pub fn run_episode(
    scenario: &ScenarioConfig,
    seed: u64,
    policy: Option<&Policy>,
    opts: &EvalOptions,
) -> Result<EpisodeOutcome> {
    let env = scenario.env;
    let mut config = scenario.world.clone();
    config.flow.seed = seed;
    let mut world = World::new(config)?;
    let service = policy.map(|p| p.service(scenario)).transpose()?;

    let mut pre = Vec::new();
    let mut warmup_samples = Vec::new();
    let platoon_id = loop {
        if let Some(p) = world.platoons.iter().find(|p| p.controlled) {
            break p.id;
        }
        if world.time >= env.warmup_limit {
            return Err(SimError::PlatoonNeverFormed(env.warmup_limit).into());
        }
        world.step(env.dt);
        pre.push((world.time, measure_metrics(&world, env.reward.delay_window)?.mean_speed));
        if opts.spacetime.is_some() {
            samples(&world, |s| warmup_samples.push(s));
        }
    };
    let formed_at = world.time;
    let end = formed_at + opts.window;
    let pre_arrival: Vec<f64> =
        pre.iter().filter(|(t, _)| *t > formed_at - PRE_ARRIVAL_SPAN).map(|&(_, v)| v).collect();

    let mut grid = opts.spacetime.map(|s| {
        let nx = ((s.region.1 - s.region.0) / s.cell_length).round().max(1.0) as usize;
        let nt = (end / s.cell_duration).ceil().max(1.0) as usize;
        space_time_grid(warmup_samples, s.region, (0.0, nt as f64 * s.cell_duration), (nx, nt))
    });

    let ticks = env.ticks_per_step();
    let mut speeds = Vec::new();
    let mut main_speeds = Vec::new();
    let mut cleared_at = None;
    while world.time < end - 1e-9 {
        if let (Some(p), Some(s)) = (policy, service.as_ref()) {
            if world.platoon_alive(platoon_id) > 0 {
                let gaps = p.advise(s, &world, platoon_id, env.reward.delay_window)?;
                world.apply_gap_commands(platoon_id, &gaps)?;
            }
        }
        for _ in 0..ticks {
            world.step(env.dt);
            let m = measure_metrics(&world, env.reward.delay_window)?;
            speeds.push((world.time, m.mean_speed));
            main_speeds.push(m.mean_speed_mainline);
            if let Some(g) = grid.as_mut() {
                samples(&world, |(t, x, v)| g.add(t, x, v));
            }
            if cleared_at.is_none() && world.platoon_alive(platoon_id) == 0 {
                cleared_at = Some(world.time);
            }
        }
    }

    let all: Vec<f64> = speeds.iter().map(|&(_, v)| v).collect();
    let tail: Vec<f64> = speeds.iter().filter(|(t, _)| *t > end - TAIL_SPAN).map(|&(_, v)| v).collect();
    let length = world.road().segment_length;
    let trips: Vec<f64> = world
        .exits
        .iter()
        .filter(|e| e.exit_time > formed_at && e.exit_time <= end + 1e-9)
        .map(|e| (length - e.entry_position) / (e.exit_time - e.entry_time))
        .collect();
    Ok(EpisodeOutcome {
        seed,
        mean_speed: mean(&all),
        trip_speed: mean(&trips),
        mean_speed_mainline: mean(&main_speeds),
        throughput: trips.len() as f64 * 3600.0 / opts.window,
        pre_arrival_speed: mean(&pre_arrival),
        tail_speed: mean(&tail),
        formed_at,
        cleared_at,
        guard_interventions: world.counters.guard_interventions,
        conserved: world.conservation_holds() && world.ordering_holds(),
        grid,
    })
}

/// `(time, position, speed)` of every mainline vehicle.
fn samples(world: &World, mut sink: impl FnMut((f64, f64, f64))) {
    let road = world.road();
    for v in world.vehicles.iter().filter(|v| !road.is_ramp(v.lane)) {
        sink((world.time, v.position, v.speed));
    }
}
