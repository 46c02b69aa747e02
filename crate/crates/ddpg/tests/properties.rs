use ddpg::{select_action, Activation, Agent, DdpgConfig, DenseNet, OuNoise, ReplayBuffer, Transition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn transition(rng: &mut ChaCha8Rng, sd: usize, ad: usize) -> Transition {
    Transition {
        state: (0..sd).map(|_| rng.random_range(0.0..1.0)).collect(),
        action: (0..ad).map(|_| rng.random_range(-1.0..1.0)).collect(),
        reward: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
        next_state: (0..sd).map(|_| rng.random_range(0.0..1.0)).collect(),
        done: rng.random_bool(0.1),
    }
}

#[test]
fn soft_update_is_exact_blend() {
    let mut cfg = DdpgConfig::new(5, 3);
    cfg.seed = 2;
    let mut agent = Agent::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..64 {
        agent.remember(transition(&mut rng, 5, 3)).unwrap();
    }
    for _ in 0..5 {
        agent.learn_step().unwrap();
    }
    let old_actor = agent.actor_target.params().to_vec();
    let old_critic = agent.critic_target.params().to_vec();
    agent.soft_update_targets().unwrap();
    let tau = agent.config.tau;
    for ((new, old), online) in agent.actor_target.params().iter().zip(&old_actor).zip(agent.actor.params()) {
        assert_eq!(*new, tau * online + (1.0 - tau) * old);
    }
    for ((new, old), online) in agent.critic_target.params().iter().zip(&old_critic).zip(agent.critic.params()) {
        assert_eq!(*new, tau * online + (1.0 - tau) * old);
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let capacity = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut buf = ReplayBuffer::new(capacity);
    for _ in 0..capacity + 37 {
        buf.push(transition(&mut rng, 1, 1));
    }
    let batch = 32;
    let draws = 100_000 / batch * batch;
    let mut counts = vec![0u64; capacity];
    for _ in 0..draws / batch {
        for i in buf.sample_indices(batch, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    let expected = draws as f64 / capacity as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((capacity - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn ou_long_run_statistics() {
    let mut ou = OuNoise::new(1, 0.15, 0.2, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let x = ou.sample(&mut rng)[0];
        sum += x;
        sum2 += x * x;
    }
    let mean = sum / n as f64;
    let var = sum2 / n as f64 - mean * mean;
    assert!(mean.abs() < 0.01, "mean {mean}");
    let target = 0.2f64.powi(2) / (2.0 * 0.15);
    assert!((var / target - 1.0).abs() < 0.05, "variance {var} vs {target}");
}

/// Critic computing `−|a|` exactly for a scalar action appended to a scalar state.
fn abs_peak_critic() -> DenseNet {
    // Hidden units relu(a) and relu(−a); output −(u1 + u2).
    let params = vec![0.0, 1.0, 0.0, -1.0, 0.0, 0.0, -1.0, -1.0, 0.0];
    DenseNet::from_params(&[2, 2, 1], &[Activation::Relu, Activation::Linear], params).unwrap()
}

#[test]
fn actor_climbs_to_the_critic_peak() {
    let mut cfg = DdpgConfig::new(1, 1);
    cfg.actor_hidden = vec![4];
    cfg.critic_hidden = vec![2];
    cfg.actor_lr = 0.01;
    let mut agent = Agent::new(cfg);
    agent.critic = abs_peak_critic();
    // Start the actor well away from the optimum.
    let n = agent.actor.num_params();
    agent.actor.params_mut()[n - 1] = 0.9;
    let states: Vec<Transition> = (0..8)
        .map(|i| Transition {
            state: vec![i as f64 / 8.0],
            action: vec![0.0],
            reward: 0.0,
            next_state: vec![0.0],
            done: true,
        })
        .collect();
    let batch: Vec<&Transition> = states.iter().collect();
    let critic_before = agent.critic.params().to_vec();
    for _ in 0..2000 {
        agent.actor_update(&batch).unwrap();
    }
    assert_eq!(agent.critic.params(), &critic_before[..]);
    for t in &states {
        let a = agent.act(&t.state).unwrap()[0];
        assert!(a.abs() < 0.05, "action {a} at state {:?}", t.state);
    }
}

#[test]
fn one_small_actor_step_does_not_lower_mean_q() {
    for seed in 0..20 {
        let mut cfg = DdpgConfig::new(6, 3);
        cfg.seed = seed;
        cfg.final_layer_scale = 0.5;
        cfg.actor_lr = 1e-5;
        let mut agent = Agent::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
        let batch: Vec<Transition> = (0..32).map(|_| transition(&mut rng, 6, 3)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mean_q = |agent: &Agent| {
            refs.iter()
                .map(|t| agent.q_value(&t.state, &agent.act(&t.state).unwrap()).unwrap())
                .sum::<f64>()
                / refs.len() as f64
        };
        let before = mean_q(&agent);
        agent.actor_update(&refs).unwrap();
        let after = mean_q(&agent);
        assert!(after >= before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn training_is_deterministic() {
    use ddpg::toy::GapSetpointToy;
    use ddpg::{train, TrainConfig};
    let run = || {
        let mut env = GapSetpointToy::new(7);
        let mut cfg = DdpgConfig::new(2, 1);
        cfg.seed = 7;
        let mut agent = Agent::new(cfg);
        let log = train(&mut env, &mut agent, &TrainConfig { episodes: 6, steps_per_episode: 25, checkpoint: None })
            .unwrap();
        (log, agent.actor.params().to_vec(), agent.critic_target.params().to_vec())
    };
    assert_eq!(run(), run());
}

#[test]
fn parameters_stay_finite_through_training() {
    let mut cfg = DdpgConfig::new(4, 2);
    cfg.batch_size = 8;
    let mut agent = Agent::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        agent.remember(transition(&mut rng, 4, 2)).unwrap();
        agent.learn_step().unwrap();
    }
    for net in [&agent.actor, &agent.critic, &agent.actor_target, &agent.critic_target] {
        assert!(net.is_finite());
    }
}

proptest! {
    #[test]
    fn actions_are_always_bounded(
        scale in 0.0f64..1e6,
        seed in any::<u64>(),
        noise in proptest::collection::vec(-1e9f64..1e9, 3),
        state in proptest::collection::vec(-1e3f64..1e3, 4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<f64> = (0..(4 * 5 + 5 + 5 * 3 + 3)).map(|_| rng.random_range(-scale..=scale)).collect();
        let actor = DenseNet::from_params(&[4, 5, 3], &[Activation::Relu, Activation::Tanh], params).unwrap();
        for a in select_action(&actor, &state, Some(&noise)).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&a));
        }
        for a in select_action(&actor, &state, None).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }
}
