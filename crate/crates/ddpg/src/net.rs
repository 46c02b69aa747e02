//! Fully connected networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector, laid out layer by layer as the
//! row-major weight matrix (`out x in`) followed by the bias vector. The
//! optimizer, soft target updates and checkpoints all operate on that flat
//! view directly.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{DdpgError, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// How the initial weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Hidden layers Glorot-uniform, final layer uniform in `±final_scale`.
    GlorotWithSmallHead { final_scale: f64 },
    Zeros,
}

#[derive(Debug)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
    offsets: Vec<usize>,
    id: u64,
    version: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        Self {
            sizes: self.sizes.clone(),
            activations: self.activations.clone(),
            params: self.params.clone(),
            offsets: self.offsets.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes
            && self.activations == other.activations
            && self.params == other.params
    }
}

/// Intermediate values from a forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    net_id: u64,
    version: u64,
    /// `values[0]` is the input, `values[l + 1]` the output of layer `l`.
    values: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("cache always holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same flat layout as [`DenseNet::params`].
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl DenseNet {
    /// `sizes` lists every layer width including input and output;
    /// `activations` has one entry per affine layer.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        init: Init,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output layer");
        assert_eq!(activations.len(), sizes.len() - 1, "one activation per layer");
        assert!(sizes.iter().all(|&s| s > 0), "layer widths must be positive");

        let offsets = layer_offsets(sizes);
        let mut params = vec![0.0; *offsets.last().unwrap()];
        if let Init::GlorotWithSmallHead { final_scale } = init {
            let n_layers = sizes.len() - 1;
            for layer in 0..n_layers {
                let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
                let bound = if layer + 1 == n_layers {
                    final_scale
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                let start = offsets[layer];
                let end = start + fan_in * fan_out;
                for w in &mut params[start..end] {
                    *w = rng.random_range(-bound..=bound);
                }
                if layer + 1 == n_layers {
                    for b in &mut params[end..offsets[layer + 1]] {
                        *b = rng.random_range(-bound..=bound);
                    }
                }
            }
        }

        Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            params,
            offsets,
            id: fresh_id(),
            version: 0,
        }
    }

    /// Rebuild a network from an explicit parameter vector.
    pub fn from_params(sizes: &[usize], activations: &[Activation], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 || sizes.contains(&0) {
            return Err(DdpgError::ShapeMismatch {
                expected: "at least two positive layer sizes and one activation per layer".into(),
                found: format!("sizes {sizes:?}, {} activations", activations.len()),
            });
        }
        let offsets = layer_offsets(sizes);
        let expected = *offsets.last().unwrap();
        if params.len() != expected {
            return Err(DdpgError::ShapeMismatch {
                expected: format!("{expected} parameters for {sizes:?}"),
                found: format!("{} parameters", params.len()),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            params,
            offsets,
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Weight matrix (row-major, `out x in`) and bias vector of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let start = self.offsets[layer];
        let split = start + n_in * n_out;
        (&self.params[start..split], &self.params[split..self.offsets[layer + 1]])
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_size() {
            return Err(DdpgError::InputSize { expected: self.input_size(), got: input.len() });
        }
        let mut values = Vec::with_capacity(self.sizes.len());
        let mut pre_activations = Vec::with_capacity(self.num_layers());
        values.push(input.to_vec());
        for layer in 0..self.num_layers() {
            let (w, b) = self.layer(layer);
            let x = values.last().unwrap();
            let n_in = x.len();
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    bias + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
                })
                .collect();
            let act = self.activations[layer];
            let y: Vec<f64> = z.iter().map(|&zi| act.apply(zi)).collect();
            pre_activations.push(z);
            values.push(y);
        }
        let output = values.last().unwrap().clone();
        Ok((
            output,
            ForwardCache { net_id: self.id, version: self.version, values, pre_activations },
        ))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(DdpgError::InputSize { expected: self.input_size(), got: input.len() });
        }
        let mut x = input.to_vec();
        for layer in 0..self.num_layers() {
            let (w, b) = self.layer(layer);
            let n_in = x.len();
            let act = self.activations[layer];
            x = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    act.apply(bias + row.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>())
                })
                .collect();
        }
        Ok(x)
    }

    /// Gradients of `grad_output · output` with respect to every parameter
    /// and to the input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<Gradients> {
        let mut grads = vec![0.0; self.params.len()];
        let input = self.backward_into(cache, grad_output, &mut grads)?;
        Ok(Gradients { params: grads, input })
    }

    /// Like [`backward`](Self::backward) but accumulates parameter gradients
    /// into `accum`; returns the input gradient.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        accum: &mut [f64],
    ) -> Result<Vec<f64>> {
        if cache.net_id != self.id || cache.version != self.version {
            return Err(DdpgError::StaleCache);
        }
        if grad_output.len() != self.output_size() {
            return Err(DdpgError::InputSize { expected: self.output_size(), got: grad_output.len() });
        }
        if accum.len() != self.params.len() {
            return Err(DdpgError::ShapeMismatch {
                expected: format!("{} gradient slots", self.params.len()),
                found: format!("{}", accum.len()),
            });
        }

        let mut upstream = grad_output.to_vec();
        for layer in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activations[layer];
            let z = &cache.pre_activations[layer];
            let y = &cache.values[layer + 1];
            let x = &cache.values[layer];
            let delta: Vec<f64> =
                (0..n_out).map(|o| upstream[o] * act.derivative(z[o], y[o])).collect();

            let start = self.offsets[layer];
            let bias_start = start + n_in * n_out;
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut accum[start + o * n_in..start + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                accum[bias_start + o] += d;
            }

            let (w, _) = self.layer(layer);
            let mut next = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                for (n, wi) in next.iter_mut().zip(row) {
                    *n += d * wi;
                }
            }
            upstream = next;
        }
        Ok(upstream)
    }

    /// `self ← tau·online + (1 − tau)·self`, elementwise.
    pub fn soft_update_from(&mut self, online: &DenseNet, tau: f64) -> Result<()> {
        if self.sizes != online.sizes {
            return Err(DdpgError::ShapeMismatch {
                expected: format!("{:?}", self.sizes),
                found: format!("{:?}", online.sizes),
            });
        }
        for (t, &o) in self.params_mut().iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    offsets.push(0);
    for pair in sizes.windows(2) {
        acc += pair[0] * pair[1] + pair[1];
        offsets.push(acc);
    }
    offsets
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_net_with_tanh_head_outputs_zero() {
        let net = DenseNet::new(
            &[3, 4, 2],
            &[Activation::Relu, Activation::Tanh],
            Init::Zeros,
            &mut rng(0),
        );
        let (out, _) = net.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn one_by_one_identity() {
        let net = DenseNet::from_params(&[1, 1], &[Activation::Linear], vec![1.0, 0.0]).unwrap();
        assert_eq!(net.predict(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn input_size_is_checked() {
        let net = DenseNet::new(&[2, 1], &[Activation::Linear], Init::Zeros, &mut rng(0));
        assert!(matches!(net.forward(&[1.0]), Err(DdpgError::InputSize { expected: 2, got: 1 })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = DenseNet::new(
            &[4, 8, 2],
            &[Activation::Relu, Activation::Tanh],
            Init::GlorotWithSmallHead { final_scale: 0.5 },
            &mut rng(3),
        );
        let (_, cache) = net.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        let g = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.params.iter().all(|&x| x == 0.0));
        assert!(g.input.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_input() {
        let net = DenseNet::from_params(&[3, 1], &[Activation::Linear], vec![0.3, -0.7, 1.1, 0.2])
            .unwrap();
        let x = [2.0, -1.5, 0.25];
        let (_, cache) = net.forward(&x).unwrap();
        let g = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(&g.params[..3], &x);
        assert_eq!(g.params[3], 1.0);
        assert_eq!(g.input, vec![0.3, -0.7, 1.1]);
    }

    #[test]
    fn cache_goes_stale_after_parameter_change() {
        let mut net = DenseNet::new(&[2, 2], &[Activation::Linear], Init::Zeros, &mut rng(0));
        let (_, cache) = net.forward(&[1.0, 1.0]).unwrap();
        net.params_mut()[0] = 1.0;
        assert!(matches!(net.backward(&cache, &[1.0, 1.0]), Err(DdpgError::StaleCache)));

        let other = net.clone();
        let (_, cache) = other.forward(&[1.0, 1.0]).unwrap();
        assert!(matches!(net.backward(&cache, &[1.0, 1.0]), Err(DdpgError::StaleCache)));
    }

    #[test]
    fn soft_update_endpoints() {
        let mut r = rng(9);
        let online = DenseNet::new(
            &[3, 5, 2],
            &[Activation::Relu, Activation::Linear],
            Init::GlorotWithSmallHead { final_scale: 1.0 },
            &mut r,
        );
        let original = DenseNet::new(
            &[3, 5, 2],
            &[Activation::Relu, Activation::Linear],
            Init::GlorotWithSmallHead { final_scale: 1.0 },
            &mut r,
        );

        let mut target = original.clone();
        target.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(target.params(), original.params());

        target.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(target.params(), online.params());

        let mut scalar = DenseNet::from_params(&[1, 1], &[Activation::Linear], vec![0.0, 0.0]).unwrap();
        let one = DenseNet::from_params(&[1, 1], &[Activation::Linear], vec![1.0, 1.0]).unwrap();
        scalar.soft_update_from(&one, 0.001).unwrap();
        assert_eq!(scalar.params(), &[0.001, 0.001]);
    }

    #[test]
    fn soft_update_rejects_shape_mismatch() {
        let mut a = DenseNet::new(&[2, 2], &[Activation::Linear], Init::Zeros, &mut rng(0));
        let b = DenseNet::new(&[2, 3], &[Activation::Linear], Init::Zeros, &mut rng(0));
        assert!(a.soft_update_from(&b, 0.5).is_err());
    }

    #[test]
    fn initialization_bounds() {
        let net = DenseNet::new(
            &[10, 32, 16, 4],
            &[Activation::Relu, Activation::Relu, Activation::Tanh],
            Init::GlorotWithSmallHead { final_scale: 3e-3 },
            &mut rng(1),
        );
        let (w0, b0) = net.layer(0);
        let bound0 = (6.0f64 / 42.0).sqrt();
        assert!(w0.iter().all(|w| w.abs() <= bound0));
        assert!(b0.iter().all(|&b| b == 0.0));
        let (w2, b2) = net.layer(2);
        assert!(w2.iter().chain(b2).all(|w| w.abs() <= 3e-3));
    }
}
