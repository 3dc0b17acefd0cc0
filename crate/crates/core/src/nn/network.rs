//! Feed-forward network with dense layers.
//!
//! Weights are stored row-major with shape `(fan_out, fan_in)`. The same
//! accumulation order is used by the single-sample and batched paths, so a
//! batched forward pass is bitwise identical to `forward` on each sample.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;
use super::error::NnError;

/// Width and activation of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: ActivationKind,
}

impl LayerSpec {
    pub fn new(width: usize, activation: ActivationKind) -> Self {
        Self { width, activation }
    }
}

/// One dense layer: `a = activation(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub(crate) in_dim: usize,
    pub(crate) width: usize,
    pub(crate) activation: ActivationKind,
    /// Row-major, shape `(width, in_dim)`.
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }
}

/// Multi-layer perceptron.
///
/// Layer `p` consumes the width of layer `p - 1` (the first consumes
/// `input_dim`); shapes are validated on construction and deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpNetworkRepr", into = "MlpNetworkRepr")]
pub struct MlpNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Serialized form; kept separate so invariants are re-checked on load.
#[derive(Serialize, Deserialize)]
struct MlpNetworkRepr {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl From<MlpNetwork> for MlpNetworkRepr {
    fn from(net: MlpNetwork) -> Self {
        Self {
            input_dim: net.input_dim,
            layers: net.layers,
        }
    }
}

impl TryFrom<MlpNetworkRepr> for MlpNetwork {
    type Error = NnError;

    fn try_from(repr: MlpNetworkRepr) -> Result<Self, NnError> {
        let net = MlpNetwork {
            input_dim: repr.input_dim,
            layers: repr.layers,
        };
        net.validate()?;
        Ok(net)
    }
}

impl MlpNetwork {
    /// Builds a network with all parameters zero.
    pub fn zeros(input_dim: usize, specs: &[LayerSpec]) -> Result<Self, NnError> {
        if input_dim == 0 {
            return Err(NnError::InvalidSpec("input_dim must be >= 1".into()));
        }
        if specs.is_empty() {
            return Err(NnError::InvalidSpec("at least one layer required".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut fan_in = input_dim;
        for spec in specs {
            if spec.width == 0 {
                return Err(NnError::InvalidSpec("layer width must be >= 1".into()));
            }
            layers.push(Layer {
                in_dim: fan_in,
                width: spec.width,
                activation: spec.activation,
                weights: vec![0.0; spec.width * fan_in],
                biases: vec![0.0; spec.width],
            });
            fan_in = spec.width;
        }
        Ok(Self { input_dim, layers })
    }

    /// Builds a network with seeded uniform initialization.
    ///
    /// ReLU layers use He-style fan-in scaling `U(±sqrt(6/fan_in))` and a
    /// small positive bias; with zero biases a narrow ReLU unit whose weights
    /// all point away from a non-negative input cloud starts dead and, since
    /// the stacks here are only a few units wide, a whole layer can start dead
    /// and freeze training at a constant output. Sigmoid and linear layers use
    /// Xavier scaling `U(±sqrt(6/(fan_in+fan_out)))` and zero biases.
    pub fn init(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Result<Self, NnError> {
        let mut net = Self::zeros(input_dim, specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let limit = match layer.activation {
                ActivationKind::Relu => (6.0 / layer.in_dim as f64).sqrt(),
                ActivationKind::Sigmoid | ActivationKind::Linear => {
                    (6.0 / (layer.in_dim + layer.width) as f64).sqrt()
                }
            };
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| NnError::InvalidSpec(e.to_string()))?;
            for w in &mut layer.weights {
                *w = dist.sample(&mut rng);
            }
            if layer.activation == ActivationKind::Relu {
                layer.biases.fill(0.1);
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.width).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Total number of trainable parameters (weights plus biases).
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Layer widths, excluding the input dimension.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.width).collect()
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.layers.is_empty() {
            return Err(NnError::InvalidSpec("empty network".into()));
        }
        let mut fan_in = self.input_dim;
        for layer in &self.layers {
            if layer.width == 0
                || layer.in_dim != fan_in
                || layer.weights.len() != layer.width * layer.in_dim
                || layer.biases.len() != layer.width
            {
                return Err(NnError::InvalidSpec("layer shapes do not chain".into()));
            }
            if !layer.weights.iter().chain(&layer.biases).all(|v| v.is_finite()) {
                return Err(NnError::InvalidSpec("non-finite parameters".into()));
            }
            fan_in = layer.width;
        }
        Ok(())
    }

    /// Splits the network into `(first take layers, rest)`, e.g. to separate
    /// a jointly trained encoder and decoder.
    pub fn split_at(&self, take: usize) -> Result<(MlpNetwork, MlpNetwork), NnError> {
        if take == 0 || take >= self.layers.len() {
            return Err(NnError::InvalidSpec(format!(
                "split index {take} out of range for {} layers",
                self.layers.len()
            )));
        }
        let front = MlpNetwork {
            input_dim: self.input_dim,
            layers: self.layers[..take].to_vec(),
        };
        let back = MlpNetwork {
            input_dim: self.layers[take - 1].width,
            layers: self.layers[take..].to_vec(),
        };
        Ok((front, back))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim {
            return Err(NnError::ShapeMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.clear();
            next.reserve(layer.width);
            for o in 0..layer.width {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, a) in row.iter().zip(cur.iter()) {
                    z += w * a;
                }
                next.push(layer.activation.apply(z));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass for a batch, keeping every intermediate activation.
    ///
    /// `input` holds `n` samples in feature-major order (`input[i*n + b]` is
    /// feature `i` of sample `b`); activations use the same layout.
    pub fn forward_batch(&self, input: &[f64], n: usize, cache: &mut BatchCache) {
        assert_eq!(input.len(), self.input_dim * n, "batch input shape");
        cache.prepare(self, n);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(l);
            let prev: &[f64] = if l == 0 { input } else { &done[l - 1] };
            let out = &mut rest[0];
            for o in 0..layer.width {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let ob = &mut out[o * n..(o + 1) * n];
                ob.fill(layer.biases[o]);
                for (i, &w) in row.iter().enumerate() {
                    let ab = &prev[i * n..(i + 1) * n];
                    for (zb, &a) in ob.iter_mut().zip(ab) {
                        *zb += w * a;
                    }
                }
                match layer.activation {
                    ActivationKind::Linear => {}
                    act => {
                        for z in ob.iter_mut() {
                            *z = act.apply(*z);
                        }
                    }
                }
            }
        }
    }

    /// Backward pass over a batch previously run through [`forward_batch`].
    ///
    /// `d_out` is dL/d(activations) of the last layer, feature-major like the
    /// cache. Parameter gradients are accumulated into `grads`; dL/d(input)
    /// lands in `cache.d_input` when requested.
    pub fn backward_batch(
        &self,
        input: &[f64],
        n: usize,
        cache: &mut BatchCache,
        d_out: &[f64],
        grads: &mut GradientSet,
        want_d_input: bool,
    ) {
        assert_eq!(d_out.len(), self.output_dim() * n, "batch delta shape");
        // Ping-pong delta buffers, taken out of the cache so layer
        // activations stay borrowable alongside them.
        let mut cur = std::mem::take(&mut cache.delta_cur);
        let mut nxt = std::mem::take(&mut cache.delta_next);
        cur.clear();
        cur.extend_from_slice(d_out);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let act_out = &cache.activations[l];
            if layer.activation != ActivationKind::Linear {
                for (d, &a) in cur.iter_mut().zip(act_out.iter()) {
                    *d *= layer.activation.grad_from_output(a);
                }
            }
            let below: &[f64] = if l == 0 {
                input
            } else {
                &cache.activations[l - 1]
            };
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for o in 0..layer.width {
                let db = &cur[o * n..(o + 1) * n];
                gb[o] += db.iter().sum::<f64>();
                let grow = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (i, g) in grow.iter_mut().enumerate() {
                    let ab = &below[i * n..(i + 1) * n];
                    let mut s = 0.0;
                    for (&d, &a) in db.iter().zip(ab) {
                        s += d * a;
                    }
                    *g += s;
                }
            }
            if l == 0 && !want_d_input {
                break;
            }
            nxt.clear();
            nxt.resize(layer.in_dim * n, 0.0);
            for i in 0..layer.in_dim {
                let lb = &mut nxt[i * n..(i + 1) * n];
                for o in 0..layer.width {
                    let w = layer.weights[o * layer.in_dim + i];
                    let db = &cur[o * n..(o + 1) * n];
                    for (lv, &d) in lb.iter_mut().zip(db) {
                        *lv += w * d;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut nxt);
        }
        if want_d_input {
            std::mem::swap(&mut cache.d_input, &mut cur);
        }
        cache.delta_cur = cur;
        cache.delta_next = nxt;
    }
}

/// Scratch buffers for batched passes; reusable across batches.
#[derive(Debug, Default, Clone)]
pub struct BatchCache {
    /// Post-activation values per layer, feature-major.
    pub activations: Vec<Vec<f64>>,
    /// Delta ping-pong buffers for the backward pass.
    delta_cur: Vec<f64>,
    delta_next: Vec<f64>,
    /// dL/d(input), filled by `backward_batch` when requested.
    pub d_input: Vec<f64>,
}

impl BatchCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, net: &MlpNetwork, n: usize) {
        self.activations.resize(net.layers.len(), Vec::new());
        for (l, layer) in net.layers.iter().enumerate() {
            self.activations[l].resize(layer.width * n, 0.0);
        }
    }

    /// Post-activation output of the last layer, feature-major.
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Per-layer parameter gradients, shaped like the owning network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v *= c;
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v *= c;
            }
        }
    }
}

/// Mean squared error between a prediction and a target of equal length.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, NnError> {
    if pred.len() != target.len() {
        return Err(NnError::ShapeMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(NnError::EmptyInput);
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Average gradient of the MSE loss over a batch of `(input, target)` pairs.
pub fn backward(net: &MlpNetwork, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<GradientSet, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyInput);
    }
    let in_dim = net.input_dim();
    let out_dim = net.output_dim();
    for (x, t) in batch {
        if x.len() != in_dim {
            return Err(NnError::ShapeMismatch {
                expected: in_dim,
                got: x.len(),
            });
        }
        if t.len() != out_dim {
            return Err(NnError::ShapeMismatch {
                expected: out_dim,
                got: t.len(),
            });
        }
    }
    let n = batch.len();
    // Feature-major gather.
    let mut input = vec![0.0; in_dim * n];
    for (b, (x, _)) in batch.iter().enumerate() {
        for (i, &v) in x.iter().enumerate() {
            input[i * n + b] = v;
        }
    }
    let mut cache = BatchCache::new();
    net.forward_batch(&input, n, &mut cache);
    let mut d_out = vec![0.0; out_dim * n];
    let scale = 2.0 / (out_dim as f64 * n as f64);
    {
        let out = cache.output();
        for (b, (_, t)) in batch.iter().enumerate() {
            for (o, &tv) in t.iter().enumerate() {
                d_out[o * n + b] = scale * (out[o * n + b] - tv);
            }
        }
    }
    let mut grads = GradientSet::zeros_like(net);
    net.backward_batch(&input, n, &mut cache, &d_out, &mut grads, false);
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn relu_spec(widths: &[usize]) -> Vec<LayerSpec> {
        widths
            .iter()
            .map(|&w| LayerSpec::new(w, ActivationKind::Relu))
            .collect()
    }

    #[test]
    fn zero_net_sigmoid_outputs_half() {
        let net =
            MlpNetwork::zeros(3, &[LayerSpec::new(2, ActivationKind::Sigmoid)]).unwrap();
        let y = net.forward(&[0.7, -1.4, 3.0]).unwrap();
        assert_eq!(y, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let mut net =
            MlpNetwork::zeros(3, &[LayerSpec::new(3, ActivationKind::Linear)]).unwrap();
        let w = net.layers_mut()[0].weights_mut();
        w[0] = 1.0;
        w[4] = 1.0;
        w[8] = 1.0;
        let y = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = MlpNetwork::zeros(3, &relu_spec(&[2])).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(NnError::ShapeMismatch { expected: 3, got: 2 })
        ));
    }

    /// Straight-line reference evaluator, written independently of the
    /// layered forward pass.
    fn reference_forward(net: &MlpNetwork, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in net.layers() {
            let mut out = vec![0.0; layer.width()];
            for (o, slot) in out.iter_mut().enumerate() {
                let mut z = layer.biases()[o];
                for i in 0..layer.in_dim() {
                    z += layer.weights()[o * layer.in_dim() + i] * cur[i];
                }
                *slot = layer.activation().apply(z);
            }
            cur = out;
        }
        cur
    }

    #[test]
    fn forward_matches_reference_evaluator() {
        let net = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(5, ActivationKind::Relu),
                LayerSpec::new(3, ActivationKind::Sigmoid),
                LayerSpec::new(2, ActivationKind::Linear),
            ],
            7,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = net.forward(&x).unwrap();
            let want = reference_forward(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn batch_forward_is_bitwise_identical_to_single() {
        let net = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(6, ActivationKind::Relu),
                LayerSpec::new(1, ActivationKind::Sigmoid),
            ],
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 17;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut input = vec![0.0; 4 * n];
        for (b, row) in rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                input[i * n + b] = v;
            }
        }
        let mut cache = BatchCache::new();
        net.forward_batch(&input, n, &mut cache);
        for (b, row) in rows.iter().enumerate() {
            let single = net.forward(row).unwrap();
            assert_eq!(single[0].to_bits(), cache.output()[b].to_bits());
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_matches_elementwise_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut acc = 0.0;
        for k in 0..20 {
            let d = a[k] - b[k];
            acc += d * d;
        }
        let oracle = acc / 20.0;
        assert!((mse_loss(&a, &b).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn backward_zero_error_batch_gives_zero_gradients() {
        let net = MlpNetwork::init(3, &[LayerSpec::new(2, ActivationKind::Linear)], 9).unwrap();
        let xs = [vec![0.4, -0.3, 1.0], vec![-1.0, 0.2, 0.1]];
        let batch: Vec<_> = xs
            .iter()
            .map(|x| (x.clone(), net.forward(x).unwrap()))
            .collect();
        let grads = backward(&net, &batch).unwrap();
        for g in grads.weights.iter().flatten().chain(grads.biases.iter().flatten()) {
            assert_eq!(*g, 0.0);
        }
    }

    #[test]
    fn backward_single_linear_layer_matches_closed_form() {
        // One linear layer, one sample: dL/dW = 2 (pred - t) x^T / out_dim.
        let net = MlpNetwork::init(3, &[LayerSpec::new(2, ActivationKind::Linear)], 13).unwrap();
        let x = vec![0.5, -1.0, 2.0];
        let t = vec![0.1, 0.2];
        let pred = net.forward(&x).unwrap();
        let grads = backward(&net, &[(x.clone(), t.clone())]).unwrap();
        for o in 0..2 {
            let coeff = 2.0 * (pred[o] - t[o]) / 2.0;
            for i in 0..3 {
                let want = coeff * x[i];
                assert!((grads.weights[0][o * 3 + i] - want).abs() <= 1e-12);
            }
            assert!((grads.biases[0][o] - coeff).abs() <= 1e-12);
        }
    }

    #[test]
    fn backward_rejects_empty_batch() {
        let net = MlpNetwork::zeros(2, &relu_spec(&[1])).unwrap();
        assert!(matches!(backward(&net, &[]), Err(NnError::EmptyInput)));
    }

    #[test]
    fn split_at_partitions_layers() {
        let net = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(3, ActivationKind::Relu),
                LayerSpec::new(2, ActivationKind::Relu),
                LayerSpec::new(4, ActivationKind::Linear),
            ],
            1,
        )
        .unwrap();
        let (front, back) = net.split_at(2).unwrap();
        assert_eq!(front.widths(), vec![3, 2]);
        assert_eq!(back.input_dim(), 2);
        assert_eq!(back.widths(), vec![4]);
        let x = [0.3, 0.1, -0.5, 0.9];
        let via_split = back.forward(&front.forward(&x).unwrap()).unwrap();
        let direct = net.forward(&x).unwrap();
        for (a, b) in via_split.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn serde_roundtrip_preserves_parameters_exactly() {
        let net = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(3, ActivationKind::Relu),
                LayerSpec::new(1, ActivationKind::Sigmoid),
            ],
            42,
        )
        .unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: MlpNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn serde_rejects_broken_shapes() {
        let net = MlpNetwork::zeros(2, &relu_spec(&[2, 1])).unwrap();
        let mut val = serde_json::to_value(&net).unwrap();
        val["layers"][1]["in_dim"] = serde_json::json!(5);
        assert!(serde_json::from_value::<MlpNetwork>(val).is_err());
    }
}
