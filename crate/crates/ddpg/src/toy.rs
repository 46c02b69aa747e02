//! One-dimensional gap-setpoint task used as a sanity check for the trainer.
//!
//! Each episode draws a target gap in `[target_min, target_max]`. The agent
//! commands a gap in `[2, 30]` m through a single action in `[-1, 1]` and
//! earns `+1` when the commanded gap lies within `tolerance` of the target,
//! `-1` otherwise. The optimal policy is known in closed form:
//! `a* = 2·(target − 2)/28 − 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::train::{Environment, Step};

const GAP_MIN: f64 = 2.0;
const GAP_MAX: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct GapSetpointToy {
    pub seed: u64,
    pub horizon: usize,
    pub tolerance: f64,
    pub target_min: f64,
    pub target_max: f64,
    target: f64,
    gap: f64,
    t: usize,
}

impl GapSetpointToy {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            horizon: 25,
            tolerance: 2.0,
            target_min: 8.0,
            target_max: 26.0,
            target: 16.0,
            gap: 16.0,
            t: 0,
        }
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn decode(action: f64) -> f64 {
        GAP_MIN + (action.clamp(-1.0, 1.0) + 1.0) / 2.0 * (GAP_MAX - GAP_MIN)
    }

    /// Closed-form optimal action for the current target.
    pub fn optimal_action(&self) -> f64 {
        2.0 * (self.target - GAP_MIN) / (GAP_MAX - GAP_MIN) - 1.0
    }

    fn observe(&self) -> Vec<f64> {
        let norm = |g: f64| (g - GAP_MIN) / (GAP_MAX - GAP_MIN);
        vec![norm(self.target), norm(self.gap)]
    }
}

impl Environment for GapSetpointToy {
    type Error = String;

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, episode: u64) -> Result<Vec<f64>, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9).wrapping_add(episode));
        self.target = rng.random_range(self.target_min..=self.target_max);
        self.gap = (GAP_MIN + GAP_MAX) / 2.0;
        self.t = 0;
        Ok(self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step, String> {
        if self.t >= self.horizon {
            return Err("episode finished".into());
        }
        let a = *action.first().ok_or("empty action")?;
        self.gap = Self::decode(a);
        self.t += 1;
        let reward = if (self.gap - self.target).abs() < self.tolerance { 1.0 } else { -1.0 };
        Ok(Step { state: self.observe(), reward, done: self.t >= self.horizon })
    }
}
