//! Training the gap policy on the merge environment.

use std::path::Path;

use ddpg::{Agent, DdpgConfig, Environment, RewardLog, Step, TrainConfig};
use onramp::{MergeEnv, ScenarioConfig, SimError};

use crate::error::{setting, Result};

/// Cycles through several scenarios, one per episode, so a single policy
/// sees every platoon size it will be evaluated on.
#[derive(Debug, Clone)]
pub struct ScenarioMix {
    envs: Vec<MergeEnv>,
    current: usize,
    seed: u64,
}

impl ScenarioMix {
    pub fn new(scenarios: Vec<ScenarioConfig>, seed: u64) -> Result<Self> {
        let envs = scenarios.into_iter().map(MergeEnv::new).collect::<onramp::Result<Vec<_>>>()?;
        let first = envs.first().ok_or_else(|| setting("scenarios", "need at least one"))?;
        let dims = (first.state_dim(), first.action_dim());
        if envs.iter().any(|e| (e.state_dim(), e.action_dim()) != dims) {
            return Err(setting("env.n_max", "all training scenarios must share n_max"));
        }
        Ok(Self { envs, current: 0, seed })
    }
}

impl Environment for ScenarioMix {
    type Error = SimError;

    fn state_dim(&self) -> usize {
        self.envs[0].state_dim()
    }

    fn action_dim(&self) -> usize {
        self.envs[0].action_dim()
    }

    fn reset(&mut self, episode: u64) -> onramp::Result<Vec<f64>> {
        self.current = (episode % self.envs.len() as u64) as usize;
        self.envs[self.current].reset_with_seed(self.seed.wrapping_add(episode))
    }

    fn step(&mut self, action: &[f64]) -> onramp::Result<Step> {
        self.envs[self.current].step(action)
    }
}

/// Every combination of controlled-platoon size and ramp demand; an empty
/// `ramp_rates` keeps the scenario's own.
pub fn variants(base: &ScenarioConfig, sizes: &[usize], ramp_rates: &[f64]) -> Vec<ScenarioConfig> {
    let rates = if ramp_rates.is_empty() { vec![base.world.flow.ramp_rate] } else { ramp_rates.to_vec() };
    let mut out = Vec::new();
    for &rate in &rates {
        for &size in sizes {
            let mut s = base.clone();
            s.world.platoons[0].size = size;
            s.world.flow.ramp_rate = rate;
            out.push(s);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Platoon sizes cycled through during training.
    pub sizes: Vec<usize>,
    /// Ramp demands (veh/h) cycled through during training.
    pub ramp_rates: Vec<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { episodes: 1000, seed: 0, sizes: vec![20, 30], ramp_rates: vec![] }
    }
}

pub fn new_agent(scenario: &ScenarioConfig, seed: u64) -> Agent {
    let mut config = DdpgConfig::new(scenario.env.state_dim(), scenario.env.action_dim());
    config.seed = seed;
    Agent::new(config)
}

/// Train a fresh agent. The episode cap is the environment's horizon.
pub fn train_policy(scenario: &ScenarioConfig, opts: &TrainOptions, checkpoint: Option<&Path>) -> Result<(Agent, RewardLog)> {
    if opts.sizes.is_empty() {
        return Err(setting("sizes", "need at least one platoon size"));
    }
    let mut env = ScenarioMix::new(variants(scenario, &opts.sizes, &opts.ramp_rates), opts.seed)?;
    let mut agent = new_agent(scenario, opts.seed);
    let config = TrainConfig { episodes: opts.episodes, steps_per_episode: scenario.env.horizon, checkpoint: None };
    let log = ddpg::train(&mut env, &mut agent, &config)?;
    if let Some(path) = checkpoint {
        ddpg::checkpoint::save(&agent, path, false)?;
    }
    Ok((agent, log))
}
