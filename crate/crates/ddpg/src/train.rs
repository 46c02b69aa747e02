//! The episodic training loop and its reward log.

use std::io::Write;
use std::path::PathBuf;

use crate::agent::Agent;
use crate::checkpoint;
use crate::error::{DdpgError, Result};
use crate::replay::Transition;

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Minimal episodic environment contract used by [`train`].
pub trait Environment {
    type Error: std::fmt::Display;

    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Start episode `episode` and return its first observation.
    fn reset(&mut self, episode: u64) -> std::result::Result<Vec<f64>, Self::Error>;
    /// Apply an action in `[-1, 1]^action_dim`.
    fn step(&mut self, action: &[f64]) -> std::result::Result<Step, Self::Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSchedule {
    pub path: PathBuf,
    pub every_episodes: usize,
    pub include_replay: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub checkpoint: Option<CheckpointSchedule>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub moving_avg_50: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardLog {
    pub records: Vec<EpisodeRecord>,
}

pub const MOVING_AVERAGE_WINDOW: usize = 50;

impl RewardLog {
    pub fn push(&mut self, cumulative_reward: f64) {
        let episode = self.records.len();
        let start = (episode + 1).saturating_sub(MOVING_AVERAGE_WINDOW);
        let window: Vec<f64> = self.records[start..]
            .iter()
            .map(|r| r.cumulative_reward)
            .chain(std::iter::once(cumulative_reward))
            .collect();
        let moving_avg_50 = window.iter().sum::<f64>() / window.len() as f64;
        self.records.push(EpisodeRecord { episode, cumulative_reward, moving_avg_50 });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn moving_averages(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.moving_avg_50).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "episode,cumulative_reward,moving_avg_50")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.episode, r.cumulative_reward, r.moving_avg_50)?;
        }
        Ok(())
    }
}

fn env_err<E: std::fmt::Display>(e: E) -> DdpgError {
    DdpgError::Environment(e.to_string())
}

/// Run `config.episodes` episodes of at most `config.steps_per_episode`
/// steps: reset noise, observe, act with exploration, store, learn.
///
/// An environment error aborts training; the last scheduled checkpoint on
/// disk is left as it was.
pub fn train<E: Environment>(env: &mut E, agent: &mut Agent, config: &TrainConfig) -> Result<RewardLog> {
    if env.state_dim() != agent.config.state_dim || env.action_dim() != agent.config.action_dim {
        return Err(DdpgError::ShapeMismatch {
            expected: format!("state {} / action {}", agent.config.state_dim, agent.config.action_dim),
            found: format!("state {} / action {}", env.state_dim(), env.action_dim()),
        });
    }

    let mut log = RewardLog::default();
    for episode in 0..config.episodes {
        agent.reset_noise();
        let mut state = env.reset(episode as u64).map_err(env_err)?;
        let mut total = 0.0;
        for _ in 0..config.steps_per_episode {
            let action = agent.act_explore(&state)?;
            let step = env.step(&action).map_err(env_err)?;
            total += step.reward;
            agent.remember(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: step.reward,
                next_state: step.state.clone(),
                done: step.done,
            })?;
            agent.learn_step()?;
            state = step.state;
            if step.done {
                break;
            }
        }
        log.push(total);

        if let Some(schedule) = &config.checkpoint {
            if schedule.every_episodes > 0 && (episode + 1) % schedule.every_episodes == 0 {
                checkpoint::save(agent, &schedule.path, schedule.include_replay)?;
            }
        }
    }
    Ok(log)
}

/// Noise-free rollouts; returns the cumulative reward of each episode.
pub fn evaluate<E: Environment>(
    env: &mut E,
    agent: &Agent,
    episodes: std::ops::Range<u64>,
    steps_per_episode: usize,
) -> Result<Vec<f64>> {
    episodes
        .map(|episode| {
            let mut state = env.reset(episode).map_err(env_err)?;
            let mut total = 0.0;
            for _ in 0..steps_per_episode {
                let step = env.step(&agent.act(&state)?).map_err(env_err)?;
                total += step.reward;
                state = step.state;
                if step.done {
                    break;
                }
            }
            Ok(total)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::DdpgConfig;

    struct Counter {
        steps: usize,
        fail_at_episode: Option<u64>,
    }

    impl Environment for Counter {
        type Error = String;
        fn state_dim(&self) -> usize {
            1
        }
        fn action_dim(&self) -> usize {
            1
        }
        fn reset(&mut self, episode: u64) -> std::result::Result<Vec<f64>, String> {
            if Some(episode) == self.fail_at_episode {
                return Err("simulator crashed".into());
            }
            self.steps = 0;
            Ok(vec![0.0])
        }
        fn step(&mut self, _action: &[f64]) -> std::result::Result<Step, String> {
            self.steps += 1;
            Ok(Step { state: vec![self.steps as f64 / 100.0], reward: 1.0, done: false })
        }
    }

    fn agent() -> Agent {
        let mut cfg = DdpgConfig::new(1, 1);
        cfg.actor_hidden = vec![4];
        cfg.critic_hidden = vec![4];
        Agent::new(cfg)
    }

    #[test]
    fn zero_episodes_is_a_no_op() {
        let mut env = Counter { steps: 0, fail_at_episode: None };
        let mut a = agent();
        let log = train(&mut env, &mut a, &TrainConfig { episodes: 0, steps_per_episode: 10, checkpoint: None })
            .unwrap();
        assert!(log.is_empty());
        assert!(a.targets_match_online());
        assert_eq!(a.replay.len(), 0);
    }

    #[test]
    fn replay_counts_every_step() {
        let mut env = Counter { steps: 0, fail_at_episode: None };
        let mut a = agent();
        let log = train(&mut env, &mut a, &TrainConfig { episodes: 3, steps_per_episode: 50, checkpoint: None })
            .unwrap();
        assert_eq!(a.replay.len(), 150);
        assert_eq!(log.records.iter().map(|r| r.cumulative_reward).collect::<Vec<_>>(), vec![50.0; 3]);
    }

    #[test]
    fn env_failure_keeps_last_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        let mut env = Counter { steps: 0, fail_at_episode: Some(3) };
        let mut a = agent();
        let cfg = TrainConfig {
            episodes: 5,
            steps_per_episode: 40,
            checkpoint: Some(CheckpointSchedule { path: path.clone(), every_episodes: 2, include_replay: false }),
        };
        let err = train(&mut env, &mut a, &cfg).unwrap_err();
        assert!(matches!(err, DdpgError::Environment(ref m) if m.contains("crashed")));
        let restored = checkpoint::load(&path).unwrap();
        assert_eq!(restored.replay_origin.unwrap().cursor, 80);
    }

    #[test]
    fn moving_average_window() {
        let mut log = RewardLog::default();
        for i in 0..60 {
            log.push(i as f64);
        }
        assert_eq!(log.records[0].moving_avg_50, 0.0);
        assert_eq!(log.records[3].moving_avg_50, 1.5);
        // Episodes 10..=59 average to 34.5.
        assert_eq!(log.records[59].moving_avg_50, 34.5);
        let mut csv = Vec::new();
        log.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("episode,cumulative_reward,moving_avg_50\n0,0,0\n"));
    }
}
