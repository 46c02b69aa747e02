use rand::Rng;
use rand_distr::StandardNormal;

/// Ornstein–Uhlenbeck exploration noise with zero mean, integrated with the
/// Euler–Maruyama step `x ← x − θ·x·dt + σ·√dt·ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    state: Vec<f64>,
    theta: f64,
    sigma: f64,
    dt: f64,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64, dt: f64) -> Self {
        assert!(theta >= 0.0 && sigma >= 0.0 && dt > 0.0, "invalid OU parameters");
        Self { state: vec![0.0; dim], theta, sigma, dt }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        let diffusion = self.sigma * self.dt.sqrt();
        for x in &mut self.state {
            let xi: f64 = rng.sample(StandardNormal);
            *x += self.theta * (0.0 - *x) * self.dt + diffusion * xi;
        }
        &self.state
    }

    /// Stationary variance of the continuous process, `σ²/(2θ)`.
    pub fn continuous_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }

    /// Exact stationary variance of the discrete recursion, `σ²/(2θ − θ²·dt)`.
    pub fn discrete_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta - self.theta * self.theta * self.dt)
    }
}
