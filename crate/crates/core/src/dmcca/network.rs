//! Per-modality feed-forward branches with hand-written reverse mode.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Linear,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Inverted dropout applied to this layer's output in train mode.
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { in_dim, out_dim, activation, dropout_rate: 0.0 }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(invalid(format!("layer dims must be >= 1, got {}->{}", self.in_dim, self.out_dim)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}

/// Chain of layer specs `dims[0] → dims[1] → …`, all sharing one activation.
pub fn mlp_specs(dims: &[usize], activation: Activation, dropout_rate: f64) -> Vec<LayerSpec> {
    dims.windows(2)
        .map(|w| LayerSpec::new(w[0], w[1], activation).with_dropout(dropout_rate))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    /// `out_dim × in_dim`.
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchNetwork<T> {
    layers: Vec<Layer<T>>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// Input of each layer.
    pub inputs: Vec<Matrix<T>>,
    /// Activation output of each layer, before dropout.
    pub activations: Vec<Matrix<T>>,
    /// Scaled keep-masks (`0` or `1/(1−p)`) where dropout was active.
    pub masks: Vec<Option<Matrix<T>>>,
}

/// Parameter gradients in the same layout as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchGrads<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> BranchGrads<T> {
    /// Flat views in parameter order: `W_0, b_0, W_1, b_1, …`.
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(invalid("network needs at least one layer"));
    }
    for s in specs {
        s.validate()?;
    }
    for (i, w) in specs.windows(2).enumerate() {
        if w[0].out_dim != w[1].in_dim {
            return Err(invalid(format!(
                "layer {i} outputs {} features but layer {} expects {}",
                w[0].out_dim,
                i + 1,
                w[1].in_dim
            )));
        }
    }
    Ok(())
}

impl<T: Scalar> BranchNetwork<T> {
    /// Weights uniform in `±1/√in_dim`, biases zero.
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        check_chain(specs)?;
        let layers = specs
            .iter()
            .map(|&spec| {
                let bound = 1.0 / (spec.in_dim as f64).sqrt();
                let weights = Matrix::from_fn(spec.out_dim, spec.in_dim, |_, _| T::lit(rng.random_range(-bound..bound)));
                Layer { spec, weights, bias: vec![T::zero(); spec.out_dim] }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        check_chain(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.shape() != (l.spec.out_dim, l.spec.in_dim) || l.bias.len() != l.spec.out_dim {
                return Err(invalid(format!("layer {i}: parameter shapes do not match its spec")));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i}: non-finite parameter")));
            }
        }
        Ok(Self { layers })
    }

    /// Single linear layer with `W = I`, `b = 0`.
    pub fn identity(dim: usize) -> Self {
        Self {
            layers: vec![Layer {
                spec: LayerSpec::new(dim, dim, Activation::Linear),
                weights: Matrix::identity(dim),
                bias: vec![T::zero(); dim],
            }],
        }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// Mutable flat views in the order used by [`BranchGrads::slices`].
    pub fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn parameters(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    /// Forward pass. Dropout is sampled from `rng` only in [`Mode::Train`].
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Matrix<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        if x.cols() != self.in_dim() {
            return Err(invalid(format!("forward: input has {} features, network expects {}", x.cols(), self.in_dim())));
        }
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            activations: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
        };
        let mut current = x.clone();
        for layer in &self.layers {
            let act = affine_activate(layer, &current);
            let rate = layer.spec.dropout_rate;
            let (out, mask) = if mode == Mode::Train && rate > 0.0 {
                let keep = T::lit(1.0 / (1.0 - rate));
                let mask = Matrix::from_fn(act.rows(), act.cols(), |_, _| {
                    if rng.random::<f64>() < rate {
                        T::zero()
                    } else {
                        keep
                    }
                });
                (act.zip_with(&mask, |a, m| a * m), Some(mask))
            } else {
                (act.clone(), None)
            };
            cache.inputs.push(std::mem::replace(&mut current, out));
            cache.activations.push(act);
            cache.masks.push(mask);
        }
        Ok((current, cache))
    }

    /// Deterministic eval-mode forward pass without a cache.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.in_dim() {
            return Err(invalid(format!("predict: input has {} features, network expects {}", x.cols(), self.in_dim())));
        }
        let mut current = affine_activate(&self.layers[0], x);
        for layer in &self.layers[1..] {
            current = affine_activate(layer, &current);
        }
        Ok(current)
    }

    /// Reverse-mode pass from `∂L/∂H` to parameter gradients.
    pub fn backprop(&self, cache: &ForwardCache<T>, grad_out: &Matrix<T>) -> Result<BranchGrads<T>> {
        let n = self.layers.len();
        if cache.inputs.len() != n || cache.activations.len() != n || cache.masks.len() != n {
            return Err(invalid("backprop: cache was produced by a different network"));
        }
        let expected = cache.activations[n - 1].shape();
        if grad_out.shape() != expected {
            return Err(invalid(format!("backprop: gradient shape {:?}, output shape {:?}", grad_out.shape(), expected)));
        }
        let mut weights = vec![Matrix::zeros(0, 0); n];
        let mut biases = vec![Vec::new(); n];
        let mut upstream = grad_out.clone();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            if cache.inputs[i].cols() != layer.spec.in_dim || cache.activations[i].cols() != layer.spec.out_dim {
                return Err(invalid(format!("backprop: cache layer {i} does not match the network")));
            }
            if let Some(mask) = &cache.masks[i] {
                upstream = upstream.zip_with(mask, |g, m| g * m);
            }
            let grad_pre = match layer.spec.activation {
                Activation::Linear => upstream,
                Activation::Tanh => upstream.zip_with(&cache.activations[i], |g, a| g * (T::one() - a * a)),
            };
            weights[i] = grad_pre.t_matmul(&cache.inputs[i]);
            biases[i] = grad_pre.column_sums();
            upstream = if i > 0 { grad_pre.matmul(&layer.weights) } else { Matrix::zeros(0, 0) };
        }
        Ok(BranchGrads { weights, biases })
    }
}

fn affine_activate<T: Scalar>(layer: &Layer<T>, input: &Matrix<T>) -> Matrix<T> {
    let mut z = input.matmul_t(&layer.weights);
    z.add_row_vector(&layer.bias);
    match layer.spec.activation {
        Activation::Linear => z,
        Activation::Tanh => z.map(|v| v.tanh()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn identity_network_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = gaussian(5, 3, &mut rng);
        let net = BranchNetwork::identity(3);
        let (h, _) = net.forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(h, x);
    }

    #[test]
    fn tanh_of_zero_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = BranchNetwork::<f64>::new(&[LayerSpec::new(4, 3, Activation::Tanh)], &mut rng).unwrap();
        let (h, _) = net.forward(&Matrix::zeros(6, 4), Mode::Eval, &mut rng).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn forward_matches_per_sample_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let specs = [LayerSpec::new(5, 4, Activation::Tanh), LayerSpec::new(4, 3, Activation::Linear)];
        let mut net = BranchNetwork::<f64>::new(&specs, &mut rng).unwrap();
        for p in net.parameters_mut() {
            for v in p.iter_mut() {
                *v += 0.1;
            }
        }
        let x = gaussian(8, 5, &mut rng);
        let (h, _) = net.forward(&x, Mode::Eval, &mut rng).unwrap();
        for r in 0..8 {
            let mut a: Vec<f64> = x.row(r).to_vec();
            for layer in net.layers() {
                let mut next = vec![0.0; layer.spec.out_dim];
                for (o, nv) in next.iter_mut().enumerate() {
                    let mut s = layer.bias[o];
                    for (i, av) in a.iter().enumerate() {
                        s += layer.weights[(o, i)] * av;
                    }
                    *nv = if layer.spec.activation == Activation::Tanh { s.tanh() } else { s };
                }
                a = next;
            }
            for c in 0..3 {
                assert!((h[(r, c)] - a[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = BranchNetwork::<f64>::identity(3);
        assert!(net.forward(&Matrix::zeros(2, 4), Mode::Eval, &mut rng).is_err());
        assert!(net.predict(&Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn linear_layer_backprop_is_affine_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = BranchNetwork::<f64>::new(&[LayerSpec::new(3, 2, Activation::Linear)], &mut rng).unwrap();
        let x = gaussian(6, 3, &mut rng);
        let (_, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
        let g = gaussian(6, 2, &mut rng);
        let grads = net.backprop(&cache, &g).unwrap();
        assert!(grads.weights[0].max_abs_diff(&g.t_matmul(&x)) < 1e-14);
        assert_eq!(grads.biases[0], g.column_sums());

        let zero = net.backprop(&cache, &Matrix::zeros(6, 2)).unwrap();
        assert!(zero.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(net.backprop(&cache, &Matrix::zeros(6, 3)).is_err());
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let specs = [LayerSpec::new(4, 50, Activation::Tanh).with_dropout(0.5)];
        let net = BranchNetwork::<f64>::new(&specs, &mut rng).unwrap();
        let x = gaussian(20, 4, &mut rng);
        let (a, _) = net.forward(&x, Mode::Eval, &mut rng).unwrap();
        let (b, _) = net.forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let (t, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
        let zeros = t.as_slice().iter().filter(|&&v| v == 0.0).count();
        assert!(zeros > 300 && zeros < 700, "{zeros}");
        let mask = cache.masks[0].as_ref().unwrap();
        assert!(mask.as_slice().iter().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn chain_is_validated() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bad = [LayerSpec::new(3, 4, Activation::Linear), LayerSpec::new(5, 2, Activation::Linear)];
        assert!(BranchNetwork::<f64>::new(&bad, &mut rng).is_err());
        assert!(BranchNetwork::<f64>::new(&[LayerSpec::new(3, 4, Activation::Linear).with_dropout(1.0)], &mut rng).is_err());
        assert!(BranchNetwork::<f64>::new(&[], &mut rng).is_err());
    }
}
