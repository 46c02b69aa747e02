use ddpg::toy::GapSetpointToy;
use ddpg::{train, Agent, DdpgConfig, TrainConfig};

fn quartile_means(values: &[f64]) -> (f64, f64) {
    let q = values.len() / 4;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&values[..q]), mean(&values[values.len() - q..]))
}

fn run(seed: u64, episodes: usize) -> (f64, f64) {
    let mut env = GapSetpointToy::new(seed);
    let mut cfg = DdpgConfig::new(2, 1);
    cfg.seed = seed;
    let mut agent = Agent::new(cfg);
    let steps = env.horizon;
    let log = train(
        &mut env,
        &mut agent,
        &TrainConfig { episodes, steps_per_episode: steps, checkpoint: None },
    )
    .unwrap();
    quartile_means(&log.moving_averages())
}

#[test]
fn toy_setpoint_reward_improves() {
    let mut improved = 0;
    for seed in 0..5 {
        let (first, last) = run(seed, 200);
        println!("seed {seed}: first quartile {first:.2}, last quartile {last:.2}");
        if last > first {
            improved += 1;
        }
    }
    assert!(improved >= 4, "only {improved} of 5 seeds improved");
}
