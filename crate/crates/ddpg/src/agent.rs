//! Actor, critic, their target copies and the per-step update rules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::AdamState;
use crate::checkpoint::ReplayMeta;
use crate::error::{DdpgError, Result};
use crate::net::{Activation, DenseNet, Init};
use crate::noise::OuNoise;
use crate::replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Discount factor applied to the bootstrapped target.
    pub discount: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    /// Half-width of the uniform init of both output layers.
    pub final_layer_scale: f64,
    pub seed: u64,
}

impl DdpgConfig {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            actor_hidden: vec![32, 16],
            critic_hidden: vec![32, 16, 8, 16, 8],
            actor_lr: 0.001,
            critic_lr: 0.001,
            discount: 0.99,
            tau: 0.001,
            batch_size: 32,
            replay_capacity: 50_000,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            ou_dt: 1.0,
            final_layer_scale: 3e-3,
            seed: 0,
        }
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.state_dim];
        sizes.extend(&self.actor_hidden);
        sizes.push(self.action_dim);
        sizes
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.state_dim + self.action_dim];
        sizes.extend(&self.critic_hidden);
        sizes.push(1);
        sizes
    }

    pub fn actor_activations(&self) -> Vec<Activation> {
        let mut acts = vec![Activation::Relu; self.actor_hidden.len()];
        acts.push(Activation::Tanh);
        acts
    }

    pub fn critic_activations(&self) -> Vec<Activation> {
        let mut acts = vec![Activation::Relu; self.critic_hidden.len()];
        acts.push(Activation::Linear);
        acts
    }
}

/// `μ(s) + noise`, clamped componentwise to `[-1, 1]`.
pub fn select_action(actor: &DenseNet, state: &[f64], noise: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut action = actor.predict(state)?;
    if let Some(noise) = noise {
        if noise.len() != action.len() {
            return Err(DdpgError::InputSize { expected: action.len(), got: noise.len() });
        }
        for (a, n) in action.iter_mut().zip(noise) {
            *a += n;
        }
    }
    for a in &mut action {
        // NaN maps to 0 so the bound holds for any input.
        *a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
    }
    Ok(action)
}

fn concat(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.len() + action.len());
    v.extend_from_slice(state);
    v.extend_from_slice(action);
    v
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: DdpgConfig,
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub actor_target: DenseNet,
    pub critic_target: DenseNet,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    pub replay: ReplayBuffer,
    pub noise: OuNoise,
    /// Replay bookkeeping of the checkpoint this agent was loaded from, when
    /// the transitions themselves were not saved.
    pub replay_origin: Option<ReplayMeta>,
    pub(crate) rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(config: DdpgConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init = Init::GlorotWithSmallHead { final_scale: config.final_layer_scale };
        let actor = DenseNet::new(&config.actor_sizes(), &config.actor_activations(), init, &mut rng);
        let critic =
            DenseNet::new(&config.critic_sizes(), &config.critic_activations(), init, &mut rng);
        Self::from_parts(config, actor, critic, rng)
    }

    pub(crate) fn from_parts(
        config: DdpgConfig,
        actor: DenseNet,
        critic: DenseNet,
        rng: ChaCha8Rng,
    ) -> Self {
        let actor_target = actor.clone();
        let critic_target = critic.clone();
        let actor_adam = AdamState::new(actor.num_params());
        let critic_adam = AdamState::new(critic.num_params());
        let replay = ReplayBuffer::new(config.replay_capacity);
        let noise = OuNoise::new(config.action_dim, config.ou_theta, config.ou_sigma, config.ou_dt);
        Self {
            config,
            actor,
            critic,
            actor_target,
            critic_target,
            actor_adam,
            critic_adam,
            replay,
            noise,
            replay_origin: None,
            rng,
        }
    }

    /// Noise-free action, as served at evaluation time.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        select_action(&self.actor, state, None)
    }

    /// Action with one fresh sample of exploration noise.
    pub fn act_explore(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        let noise = self.noise.sample(&mut self.rng).to_vec();
        select_action(&self.actor, state, Some(&noise))
    }

    pub fn reset_noise(&mut self) {
        self.noise.reset();
    }

    pub fn remember(&mut self, transition: Transition) -> Result<()> {
        let (sd, ad) = (self.config.state_dim, self.config.action_dim);
        if transition.state.len() != sd || transition.next_state.len() != sd {
            return Err(DdpgError::InputSize {
                expected: sd,
                got: if transition.state.len() != sd {
                    transition.state.len()
                } else {
                    transition.next_state.len()
                },
            });
        }
        if transition.action.len() != ad {
            return Err(DdpgError::InputSize { expected: ad, got: transition.action.len() });
        }
        self.replay.push(transition);
        Ok(())
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.critic.predict(&concat(state, action))?[0])
    }

    /// Bellman targets `r + β·Q'(s', μ'(s'))`, bootstrap dropped on terminal steps.
    pub fn critic_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                if t.done {
                    return Ok(t.reward);
                }
                let next_action = self.actor_target.predict(&t.next_state)?;
                let q_next = self.critic_target.predict(&concat(&t.next_state, &next_action))?[0];
                Ok(t.reward + self.config.discount * q_next)
            })
            .collect()
    }

    /// One Adam step on the critic's mean squared Bellman error. Returns the
    /// loss measured before the step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(DdpgError::InsufficientSamples { have: 0, need: 1 });
        }
        let targets = self.critic_targets(batch)?;
        let n = batch.len() as f64;
        let mut grads = vec![0.0; self.critic.num_params()];
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let (q, cache) = self.critic.forward(&concat(&t.state, &t.action))?;
            let err = q[0] - y;
            loss += err * err;
            self.critic.backward_into(&cache, &[2.0 * err / n], &mut grads)?;
        }
        let lr = self.config.critic_lr;
        self.critic_adam.step(self.critic.params_mut(), &grads, lr)?;
        Ok(loss / n)
    }

    /// One Adam step on the actor along the sampled deterministic policy
    /// gradient; the critic is only read.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(DdpgError::InsufficientSamples { have: 0, need: 1 });
        }
        let n = batch.len() as f64;
        let sd = self.config.state_dim;
        let mut actor_grads = vec![0.0; self.actor.num_params()];
        let mut scratch = vec![0.0; self.critic.num_params()];
        for t in batch {
            let (action, actor_cache) = self.actor.forward(&t.state)?;
            let (_, critic_cache) = self.critic.forward(&concat(&t.state, &action))?;
            // Minimize −Q, so the upstream gradient is −1/N.
            let input_grad = self.critic.backward_into(&critic_cache, &[-1.0 / n], &mut scratch)?;
            self.actor.backward_into(&actor_cache, &input_grad[sd..], &mut actor_grads)?;
        }
        let lr = self.config.actor_lr;
        self.actor_adam.step(self.actor.params_mut(), &actor_grads, lr)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.critic_target.soft_update_from(&self.critic, tau)?;
        self.actor_target.soft_update_from(&self.actor, tau)
    }

    /// Sample one minibatch, then critic update, actor update and soft target
    /// updates in that order. Returns `None` while replay holds fewer than a
    /// batch of transitions.
    pub fn learn_step(&mut self) -> Result<Option<f64>> {
        let batch_size = self.config.batch_size;
        if self.replay.len() < batch_size {
            return Ok(None);
        }
        let indices = self.replay.sample_indices(batch_size, &mut self.rng)?;
        let batch: Vec<Transition> =
            indices.iter().map(|&i| self.replay.get(i).unwrap().clone()).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let loss = self.critic_update(&refs)?;
        self.actor_update(&refs)?;
        self.soft_update_targets()?;
        Ok(Some(loss))
    }

    pub fn targets_match_online(&self) -> bool {
        self.actor_target == self.actor && self.critic_target == self.critic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DdpgConfig {
        let mut cfg = DdpgConfig::new(3, 2);
        cfg.actor_hidden = vec![8];
        cfg.critic_hidden = vec![8, 4];
        cfg.batch_size = 4;
        cfg.seed = 5;
        cfg
    }

    fn transition(reward: f64, done: bool) -> Transition {
        Transition {
            state: vec![0.1, -0.2, 0.3],
            action: vec![0.5, -0.5],
            reward,
            next_state: vec![0.2, 0.0, -0.1],
            done,
        }
    }

    fn zero_net(net: &mut DenseNet) {
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
    }

    #[test]
    fn targets_start_equal_to_online() {
        let agent = Agent::new(DdpgConfig::new(34, 29));
        assert!(agent.targets_match_online());
        assert_eq!(agent.actor.sizes(), &[34, 32, 16, 29]);
        assert_eq!(agent.critic.sizes(), &[63, 32, 16, 8, 16, 8, 1]);
    }

    #[test]
    fn zero_actor_without_noise_gives_zero_action() {
        let mut agent = Agent::new(small_config());
        zero_net(&mut agent.actor);
        assert_eq!(agent.act(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn noisy_action_is_clamped() {
        let actor = DenseNet::from_params(&[1, 1], &[Activation::Linear], vec![0.0, 0.9995]).unwrap();
        let a = select_action(&actor, &[0.0], Some(&[0.3])).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let agent = Agent::new(small_config());
        let s = [0.4, 0.1, -0.9];
        assert_eq!(agent.act(&s).unwrap(), agent.act(&s).unwrap());
    }

    #[test]
    fn terminal_unit_rewards_with_zero_critic_give_unit_loss() {
        let mut agent = Agent::new(small_config());
        zero_net(&mut agent.critic);
        let batch: Vec<Transition> = (0..4).map(|_| transition(1.0, true)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        assert_eq!(agent.critic_update(&refs).unwrap(), 1.0);
    }

    #[test]
    fn zero_discount_targets_are_rewards() {
        let mut cfg = small_config();
        cfg.discount = 0.0;
        let agent = Agent::new(cfg);
        let batch = [transition(1.0, false), transition(-1.0, false), transition(0.25, true)];
        let refs: Vec<&Transition> = batch.iter().collect();
        assert_eq!(agent.critic_targets(&refs).unwrap(), vec![1.0, -1.0, 0.25]);
    }

    #[test]
    fn single_transition_loss_matches_forward_pass() {
        let mut agent = Agent::new(small_config());
        let t = transition(-1.0, false);
        // Independent evaluation of (y − Q)² from the four networks.
        let a_next = agent.actor_target.predict(&t.next_state).unwrap();
        let mut next_in = t.next_state.clone();
        next_in.extend(&a_next);
        let y = t.reward + 0.99 * agent.critic_target.predict(&next_in).unwrap()[0];
        let mut cur_in = t.state.clone();
        cur_in.extend(&t.action);
        let q = agent.critic.predict(&cur_in).unwrap()[0];
        let loss = agent.critic_update(&[&t]).unwrap();
        assert!((loss - (y - q) * (y - q)).abs() < 1e-15);
    }

    #[test]
    fn zero_critic_leaves_actor_unchanged() {
        let mut agent = Agent::new(small_config());
        zero_net(&mut agent.critic);
        let before = agent.actor.params().to_vec();
        let batch = [transition(0.0, false)];
        agent.actor_update(&[&batch[0]]).unwrap();
        assert_eq!(agent.actor.params(), &before[..]);
    }

    #[test]
    fn underfull_replay_does_not_learn() {
        let mut agent = Agent::new(small_config());
        agent.remember(transition(1.0, false)).unwrap();
        assert_eq!(agent.learn_step().unwrap(), None);
        assert!(agent.targets_match_online());
    }

    #[test]
    fn remember_checks_dimensions() {
        let mut agent = Agent::new(small_config());
        let mut t = transition(1.0, false);
        t.action.push(0.0);
        assert!(agent.remember(t).is_err());
    }
}
