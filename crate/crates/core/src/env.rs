//! The merge MDP: observations, gap actions, the delay reward and episodes.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::platoon::{GAP_MAX, GAP_MIN};
use crate::sim::metrics::{measure_metrics, SegmentMetrics};
use crate::sim::world::{ExitRecord, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub l_segment: f64,
    /// Speed below which traffic counts as congested (m/s).
    pub v_congestion: f64,
    /// Trailing window over which completed trips are averaged (s).
    pub delay_window: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { l_segment: 1100.0, v_congestion: 25.0 / 3.0, delay_window: 60.0 }
    }
}

impl RewardConfig {
    pub fn threshold(&self) -> f64 {
        self.l_segment / self.v_congestion
    }
}

/// Upper ends of the min-max normalisation; every lower end is zero except
/// the gaps, which use `[2, 30]` m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormBounds {
    /// veh/km/lane
    pub density_mainline: f64,
    /// veh/km
    pub density_ramp: f64,
    /// m/s; `None` uses the road's speed limit.
    pub speed: Option<f64>,
}

impl Default for NormBounds {
    fn default() -> Self {
        Self { density_mainline: 60.0, density_ramp: 60.0, speed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub reward: RewardConfig,
    pub bounds: NormBounds,
    /// Simulator step (s).
    pub dt: f64,
    /// Simulated time between gap decisions (s).
    pub decision_interval: f64,
    /// Maximum decisions per episode.
    pub horizon: usize,
    /// Largest platoon the observation and action vectors can describe.
    pub n_max: usize,
    /// Give up on reset if the controlled platoon has not formed by then (s).
    pub warmup_limit: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reward: RewardConfig::default(),
            bounds: NormBounds::default(),
            dt: 0.1,
            decision_interval: 1.0,
            horizon: 300,
            n_max: 30,
            warmup_limit: 600.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| SimError::Config { key: format!("env.{key}"), reason: reason.into() };
        if !(self.reward.v_congestion > 0.0) {
            return Err(bad("reward.v_congestion", "must be positive"));
        }
        if !(self.reward.l_segment > 0.0) {
            return Err(bad("reward.l_segment", "must be positive"));
        }
        if !(self.reward.delay_window > 0.0) {
            return Err(bad("reward.delay_window", "must be positive"));
        }
        if !(self.bounds.density_mainline > 0.0 && self.bounds.density_ramp > 0.0) {
            return Err(bad("bounds", "density bounds must be positive"));
        }
        if self.bounds.speed.is_some_and(|v| !(v > 0.0)) {
            return Err(bad("bounds.speed", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(bad("dt", "must be positive"));
        }
        if !(self.decision_interval >= self.dt) {
            return Err(bad("decision_interval", "must be at least one simulator step"));
        }
        if self.horizon == 0 {
            return Err(bad("horizon", "must be at least 1"));
        }
        if self.n_max < 2 {
            return Err(bad("n_max", "must be at least 2"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        5 + self.n_max - 1
    }

    pub fn action_dim(&self) -> usize {
        self.n_max - 1
    }

    /// World ticks per decision.
    pub fn ticks_per_step(&self) -> usize {
        (self.decision_interval / self.dt).round().max(1.0) as usize
    }
}

/// Raw observation before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub density_mainline: f64,
    pub density_ramp: f64,
    pub mean_speed_mainline: f64,
    pub mean_speed_ramp: f64,
    pub platoon_size: usize,
    /// Actual gaps, `platoon_size - 1` of them.
    pub gaps: Vec<f64>,
}

fn unit(value: f64, lo: f64, hi: f64) -> f64 {
    ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
}

impl Observation {
    pub fn from_parts(metrics: &SegmentMetrics, platoon_size: usize, gaps: Vec<f64>) -> Self {
        Self {
            density_mainline: metrics.density_mainline,
            density_ramp: metrics.density_ramp,
            mean_speed_mainline: metrics.mean_speed_mainline,
            mean_speed_ramp: metrics.mean_speed_ramp,
            platoon_size,
            gaps,
        }
    }

    /// Fixed-length vector in `[0, 1]`. Slots past the platoon's gaps carry
    /// the normalised `default_gap`.
    pub fn normalize(&self, cfg: &EnvConfig, speed_limit: f64, default_gap: f64) -> Result<Vec<f64>> {
        if self.platoon_size > cfg.n_max {
            return Err(SimError::PlatoonTooLarge { size: self.platoon_size, n_max: cfg.n_max });
        }
        let vmax = cfg.bounds.speed.unwrap_or(speed_limit);
        let mut out = Vec::with_capacity(cfg.state_dim());
        out.push(unit(self.density_mainline, 0.0, cfg.bounds.density_mainline));
        out.push(unit(self.density_ramp, 0.0, cfg.bounds.density_ramp));
        out.push(unit(self.mean_speed_mainline, 0.0, vmax));
        out.push(unit(self.mean_speed_ramp, 0.0, vmax));
        out.push(unit(self.platoon_size as f64, 0.0, cfg.n_max as f64));
        let pad = unit(default_gap, GAP_MIN, GAP_MAX);
        out.extend(self.gaps.iter().map(|&g| unit(g, GAP_MIN, GAP_MAX)));
        out.resize(cfg.state_dim(), pad);
        Ok(out)
    }
}

/// Normalised observation of `platoon_id` in `world`.
pub fn observe(world: &World, platoon_id: u64, cfg: &EnvConfig) -> Result<Vec<f64>> {
    let metrics = measure_metrics(world, cfg.reward.delay_window)?;
    let summary = world.platoon_summary(platoon_id)?;
    let default_gap = world.platoon(platoon_id).ok_or(SimError::UnknownPlatoon(platoon_id))?.default_gap;
    Observation::from_parts(&metrics, summary.size, summary.actual_gaps).normalize(
        cfg,
        world.road().speed_limit,
        default_gap,
    )
}

/// Map actor outputs onto gaps for a platoon of `platoon_size`; components
/// past `platoon_size - 1` are dropped.
pub fn decode_action(raw: &[f64], platoon_size: usize) -> Vec<f64> {
    raw.iter()
        .take(platoon_size.saturating_sub(1))
        .map(|&r| GAP_MIN + (r.clamp(-1.0, 1.0) + 1.0) / 2.0 * (GAP_MAX - GAP_MIN))
        .collect()
}

/// Mean segment-normalised traversal time of trips completed in
/// `(now - window, now]`, or `None` if there were none.
pub fn trailing_delay(exits: &[ExitRecord], segment_length: f64, now: f64, window: f64) -> Option<f64> {
    let recent: Vec<f64> = exits
        .iter()
        .rev()
        .take_while(|e| e.exit_time > now - window)
        .map(|e| e.normalized_delay(segment_length))
        .collect();
    (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64)
}

/// +1 when the delay is at most the congested-traffic delay, else −1.
pub fn reward_for_delay(delay: f64, cfg: &RewardConfig) -> f64 {
    if delay <= cfg.threshold() {
        1.0
    } else {
        -1.0
    }
}

/// Reward at the current world time. Until a full window has passed since
/// `episode_start`, and whenever no trip completed inside the window, the
/// delay is estimated from the instantaneous mean speed.
pub fn compute_reward(world: &World, episode_start: f64, cfg: &RewardConfig) -> Result<f64> {
    let instantaneous = || -> Result<f64> {
        let m = measure_metrics(world, cfg.delay_window)?;
        Ok(cfg.l_segment / m.mean_speed.max(1e-9))
    };
    let delay = if world.time - episode_start < cfg.delay_window {
        instantaneous()?
    } else {
        match trailing_delay(&world.exits, cfg.l_segment, world.time, cfg.delay_window) {
            Some(d) => d,
            None => instantaneous()?,
        }
    };
    Ok(reward_for_delay(delay, cfg))
}

/// One episode around the controlled platoon.
#[derive(Debug, Clone)]
pub struct MergeEnv {
    scenario: ScenarioConfig,
    world: Option<World>,
    platoon_id: u64,
    episode_start: f64,
    steps: usize,
    done: bool,
}

impl MergeEnv {
    pub fn new(scenario: ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        if !scenario.world.platoons.iter().any(|p| p.controlled) {
            return Err(SimError::NoControlledPlatoon);
        }
        Ok(Self { scenario, world: None, platoon_id: 0, episode_start: 0.0, steps: 0, done: true })
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.scenario.env
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }

    pub fn platoon_id(&self) -> u64 {
        self.platoon_id
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Fresh world seeded with `seed`, run until the controlled platoon has
    /// entered. Returns the first observation.
    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut config = self.scenario.world.clone();
        config.flow.seed = seed;
        let mut world = World::new(config)?;
        let dt = self.scenario.env.dt;
        let id = loop {
            if let Some(p) = world.platoons.iter().find(|p| p.controlled) {
                break p.id;
            }
            if world.time >= self.scenario.env.warmup_limit {
                return Err(SimError::PlatoonNeverFormed(self.scenario.env.warmup_limit));
            }
            world.step(dt);
        };
        self.platoon_id = id;
        self.episode_start = world.time;
        self.steps = 0;
        self.done = false;
        self.world = Some(world);
        self.observe()
    }

    pub fn observe(&self) -> Result<Vec<f64>> {
        let world = self.world.as_ref().ok_or(SimError::EpisodeFinished)?;
        observe(world, self.platoon_id, &self.scenario.env)
    }

    /// Apply `gaps` (or keep the current setpoints when `None`), advance one
    /// decision interval and return `(observation, reward, done)`.
    pub fn step_gaps(&mut self, gaps: Option<&[f64]>) -> Result<(Vec<f64>, f64, bool)> {
        if self.done {
            return Err(SimError::EpisodeFinished);
        }
        let env = self.scenario.env;
        let world = self.world.as_mut().ok_or(SimError::EpisodeFinished)?;
        if let Some(gaps) = gaps {
            world.apply_gap_commands(self.platoon_id, gaps)?;
        }
        for _ in 0..env.ticks_per_step() {
            world.step(env.dt);
        }
        self.steps += 1;
        let reward = compute_reward(world, self.episode_start, &env.reward)?;
        self.done = self.steps >= env.horizon || world.platoon_alive(self.platoon_id) == 0;
        let obs = observe(world, self.platoon_id, &env)?;
        Ok((obs, reward, self.done))
    }

    /// Decode a raw actor output and step with it.
    pub fn step_action(&mut self, raw: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
        let size = self
            .world
            .as_ref()
            .and_then(|w| w.platoon(self.platoon_id))
            .map(|p| p.size())
            .ok_or(SimError::EpisodeFinished)?;
        let gaps = decode_action(raw, size);
        self.step_gaps(Some(&gaps))
    }
}

impl ddpg::Environment for MergeEnv {
    type Error = SimError;

    fn state_dim(&self) -> usize {
        self.scenario.env.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.scenario.env.action_dim()
    }

    fn reset(&mut self, episode: u64) -> Result<Vec<f64>> {
        self.reset_with_seed(self.scenario.world.flow.seed.wrapping_add(episode))
    }

    fn step(&mut self, action: &[f64]) -> Result<ddpg::Step> {
        let (state, reward, done) = self.step_action(action)?;
        Ok(ddpg::Step { state, reward, done })
    }
}
