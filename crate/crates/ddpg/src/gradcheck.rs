//! Central-difference check of [`DenseNet::backward`].
//!
//! The objective is `upstream · f(x)` evaluated with a forward pass written
//! straight from the parameter layout, so the check does not lean on the
//! code it is checking.

use rand::Rng;

use crate::net::{Activation, DenseNet};

/// Output of a forward pass plus the on/off state of every ReLU unit.
pub fn reference_forward(sizes: &[usize], acts: &[Activation], params: &[f64], input: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let mut pattern = Vec::new();
    let mut x = input.to_vec();
    let mut offset = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut y = vec![0.0; n_out];
        for (o, yo) in y.iter_mut().enumerate() {
            let mut z = params[offset + n_in * n_out + o];
            for (i, xi) in x.iter().enumerate() {
                z += params[offset + o * n_in + i] * xi;
            }
            *yo = match acts[l] {
                Activation::Relu => {
                    pattern.push(z > 0.0);
                    z.max(0.0)
                }
                Activation::Tanh => z.tanh(),
                Activation::Linear => z,
            };
        }
        offset += n_in * n_out + n_out;
        x = y;
    }
    (x, pattern)
}

fn objective(net: &DenseNet, params: &[f64], input: &[f64], upstream: &[f64]) -> (f64, Vec<bool>) {
    let (y, pattern) = reference_forward(net.sizes(), net.activations(), params, input);
    (y.iter().zip(upstream).map(|(y, g)| y * g).sum(), pattern)
}

/// Relative error with an absolute floor of 1e-6 for vanishing gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheck {
    pub worst: f64,
    pub compared: usize,
    /// Coordinates whose stencil crossed a ReLU kink, where a central
    /// difference says nothing about the derivative.
    pub skipped: usize,
}

impl GradCheck {
    pub fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            worst: self.worst.max(other.worst),
            compared: self.compared + other.compared,
            skipped: self.skipped + other.skipped,
        }
    }
}

/// Compare backprop against central differences with step `h` for every
/// parameter and input coordinate at a random input and upstream gradient.
pub fn check_gradients<R: Rng + ?Sized>(net: &DenseNet, h: f64, rng: &mut R) -> GradCheck {
    let input: Vec<f64> = (0..net.input_size()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upstream: Vec<f64> = (0..net.output_size()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, cache) = net.forward(&input).expect("input sized to the net");
    let grads = net.backward(&cache, &upstream).expect("upstream sized to the net");
    let base = objective(net, net.params(), &input, &upstream).1;

    let mut check = GradCheck::default();
    let mut record = |analytic: f64, plus: (f64, Vec<bool>), minus: (f64, Vec<bool>)| {
        if plus.1 != base || minus.1 != base {
            check.skipped += 1;
            return;
        }
        check.compared += 1;
        check.worst = check.worst.max(rel_err(analytic, (plus.0 - minus.0) / (2.0 * h)));
    };
    let mut params = net.params().to_vec();
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let plus = objective(net, &params, &input, &upstream);
        params[i] = orig - h;
        let minus = objective(net, &params, &input, &upstream);
        params[i] = orig;
        record(grads.params[i], plus, minus);
    }
    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = objective(net, &params, &x, &upstream);
        x[i] = orig - h;
        let minus = objective(net, &params, &x, &upstream);
        x[i] = orig;
        record(grads.input[i], plus, minus);
    }
    check
}

/// Every weight and bias uniform in ±0.4. Nonzero biases keep a dead layer
/// from parking the next pre-activations exactly on a ReLU kink.
pub fn random_net<R: Rng + ?Sized>(sizes: &[usize], acts: &[Activation], rng: &mut R) -> DenseNet {
    let n: usize = sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
    let params = (0..n).map(|_| rng.random_range(-0.4..0.4)).collect();
    DenseNet::from_params(sizes, acts, params).expect("parameter count matches the sizes")
}
