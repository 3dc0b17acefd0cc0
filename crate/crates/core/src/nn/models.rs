//! Trainable model graphs.
//!
//! Two shapes cover every scheme in this crate: a plain chain (one network),
//! and parallel branch networks whose concatenated outputs feed a trunk.
//! Branches may be frozen; gradients are then neither computed nor applied
//! for them.

use super::error::NnError;
use super::network::{BatchCache, GradientSet, MlpNetwork};

/// Supervised dataset stored flat, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    len: usize,
    input_dim: usize,
    target_dim: usize,
}

impl TrainSet {
    pub fn new(
        inputs: Vec<f64>,
        targets: Vec<f64>,
        input_dim: usize,
        target_dim: usize,
    ) -> Result<Self, NnError> {
        if input_dim == 0 || target_dim == 0 {
            return Err(NnError::InvalidSpec("zero-width dataset".into()));
        }
        if inputs.len() % input_dim != 0 {
            return Err(NnError::ShapeMismatch {
                expected: input_dim,
                got: inputs.len() % input_dim,
            });
        }
        let len = inputs.len() / input_dim;
        if targets.len() != len * target_dim {
            return Err(NnError::ShapeMismatch {
                expected: len * target_dim,
                got: targets.len(),
            });
        }
        Ok(Self {
            inputs,
            targets,
            len,
            input_dim,
            target_dim,
        })
    }

    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self, NnError> {
        if inputs.len() != targets.len() {
            return Err(NnError::ShapeMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(NnError::EmptyInput);
        }
        let input_dim = inputs[0].len();
        let target_dim = targets[0].len();
        let flat_in: Vec<f64> = inputs.iter().flatten().copied().collect();
        let flat_tg: Vec<f64> = targets.iter().flatten().copied().collect();
        Self::new(flat_in, flat_tg, input_dim, target_dim)
    }

    /// Dataset whose targets equal its inputs (reconstruction training).
    pub fn reconstruction(inputs: Vec<f64>, input_dim: usize) -> Result<Self, NnError> {
        let targets = inputs.clone();
        Self::new(inputs, targets, input_dim, input_dim)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target_row(&self, i: usize) -> &[f64] {
        &self.targets[i * self.target_dim..(i + 1) * self.target_dim]
    }

    /// Flat sample-major input buffer (`len * input_dim` values).
    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// Flat sample-major target buffer (`len * target_dim` values).
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Transposes the selected samples into feature-major batch buffers.
    pub(crate) fn gather(&self, idx: &[usize], input_buf: &mut Vec<f64>, target_buf: &mut Vec<f64>) {
        let n = idx.len();
        input_buf.resize(self.input_dim * n, 0.0);
        target_buf.resize(self.target_dim * n, 0.0);
        for (b, &s) in idx.iter().enumerate() {
            let row = self.input_row(s);
            for (i, &v) in row.iter().enumerate() {
                input_buf[i * n + b] = v;
            }
            let row = self.target_row(s);
            for (i, &v) in row.iter().enumerate() {
                target_buf[i * n + b] = v;
            }
        }
    }
}

/// One parallel branch of a [`TrainGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBranch {
    pub net: MlpNetwork,
    /// First input feature this branch consumes; the branch reads
    /// `net.input_dim()` consecutive features from there.
    pub input_offset: usize,
    pub trainable: bool,
}

impl TrainBranch {
    pub fn new(net: MlpNetwork, input_offset: usize, trainable: bool) -> Self {
        Self {
            net,
            input_offset,
            trainable,
        }
    }
}

/// A chain network, or parallel branches feeding a trainable trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainGraph {
    branches: Vec<TrainBranch>,
    trunk: Option<MlpNetwork>,
    input_dim: usize,
    output_dim: usize,
}

impl TrainGraph {
    /// Wraps a single network.
    pub fn chain(net: MlpNetwork) -> Self {
        let input_dim = net.input_dim();
        let output_dim = net.output_dim();
        Self {
            branches: vec![TrainBranch::new(net, 0, true)],
            trunk: None,
            input_dim,
            output_dim,
        }
    }

    /// Parallel branches whose concatenated outputs (in branch order) feed
    /// the trunk. Branch input windows may overlap.
    pub fn branch_trunk(branches: Vec<TrainBranch>, trunk: MlpNetwork) -> Result<Self, NnError> {
        if branches.is_empty() {
            return Err(NnError::InvalidSpec("at least one branch required".into()));
        }
        let concat: usize = branches.iter().map(|b| b.net.output_dim()).sum();
        if trunk.input_dim() != concat {
            return Err(NnError::ShapeMismatch {
                expected: concat,
                got: trunk.input_dim(),
            });
        }
        let input_dim = branches
            .iter()
            .map(|b| b.input_offset + b.net.input_dim())
            .max()
            .unwrap();
        let output_dim = trunk.output_dim();
        Ok(Self {
            branches,
            trunk: Some(trunk),
            input_dim,
            output_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn branches(&self) -> &[TrainBranch] {
        &self.branches
    }

    pub fn trunk(&self) -> Option<&MlpNetwork> {
        self.trunk.as_ref()
    }

    pub fn into_parts(self) -> (Vec<TrainBranch>, Option<MlpNetwork>) {
        (self.branches, self.trunk)
    }

    /// Trainable networks in gradient order: trainable branches by index,
    /// then the trunk.
    pub(crate) fn trainable_nets_mut(&mut self) -> Vec<&mut MlpNetwork> {
        let mut nets: Vec<&mut MlpNetwork> = self
            .branches
            .iter_mut()
            .filter(|b| b.trainable)
            .map(|b| &mut b.net)
            .collect();
        if let Some(t) = self.trunk.as_mut() {
            nets.push(t);
        }
        nets
    }

    /// Single-sample evaluation.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim {
            return Err(NnError::ShapeMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut concat = Vec::with_capacity(
            self.branches.iter().map(|b| b.net.output_dim()).sum::<usize>(),
        );
        for branch in &self.branches {
            let d = branch.net.input_dim();
            let y = branch
                .net
                .forward(&x[branch.input_offset..branch.input_offset + d])?;
            concat.extend(y);
        }
        match &self.trunk {
            Some(trunk) => trunk.forward(&concat),
            None => Ok(concat),
        }
    }

    /// Batched forward pass; `input` is feature-major with `n` samples.
    pub fn forward_batch(&self, input: &[f64], n: usize, scratch: &mut GraphScratch) {
        assert_eq!(input.len(), self.input_dim * n, "graph input shape");
        scratch
            .branch_caches
            .resize(self.branches.len(), BatchCache::new());
        for (bi, branch) in self.branches.iter().enumerate() {
            let d = branch.net.input_dim();
            let slice = &input[branch.input_offset * n..(branch.input_offset + d) * n];
            branch.net.forward_batch(slice, n, &mut scratch.branch_caches[bi]);
        }
        if let Some(trunk) = &self.trunk {
            scratch.trunk_input.resize(trunk.input_dim() * n, 0.0);
            let mut off = 0;
            for (bi, branch) in self.branches.iter().enumerate() {
                let w = branch.net.output_dim();
                scratch.trunk_input[off * n..(off + w) * n]
                    .copy_from_slice(scratch.branch_caches[bi].output());
                off += w;
            }
            trunk.forward_batch(&scratch.trunk_input, n, &mut scratch.trunk_cache);
        }
    }

    /// Output of the latest [`forward_batch`] on `scratch`, feature-major.
    pub fn output<'a>(&self, scratch: &'a GraphScratch) -> &'a [f64] {
        if self.trunk.is_some() {
            scratch.trunk_cache.output()
        } else {
            scratch.branch_caches[0].output()
        }
    }

    /// Backward pass after [`forward_batch`] with the same `input` and
    /// `scratch`. `d_out` is dL/d(output), feature-major. Gradients
    /// accumulate into `grads` (trainable nets only).
    pub fn backward_batch(
        &self,
        input: &[f64],
        n: usize,
        scratch: &mut GraphScratch,
        d_out: &[f64],
        grads: &mut GraphGrads,
    ) {
        let nb_trainable = self.branches.iter().filter(|b| b.trainable).count();
        match &self.trunk {
            Some(trunk) => {
                let (branch_sets, trunk_set) = grads.sets.split_at_mut(nb_trainable);
                trunk.backward_batch(
                    &scratch.trunk_input,
                    n,
                    &mut scratch.trunk_cache,
                    d_out,
                    &mut trunk_set[0],
                    nb_trainable > 0,
                );
                let mut off = 0;
                let mut k = 0;
                for (bi, branch) in self.branches.iter().enumerate() {
                    let w = branch.net.output_dim();
                    if branch.trainable {
                        let d = branch.net.input_dim();
                        let slice = &input[branch.input_offset * n..(branch.input_offset + d) * n];
                        branch.net.backward_batch(
                            slice,
                            n,
                            &mut scratch.branch_caches[bi],
                            &scratch.trunk_cache.d_input[off * n..(off + w) * n],
                            &mut branch_sets[k],
                            false,
                        );
                        k += 1;
                    }
                    off += w;
                }
            }
            None => {
                let branch = &self.branches[0];
                let d = branch.net.input_dim();
                let slice = &input[branch.input_offset * n..(branch.input_offset + d) * n];
                branch.net.backward_batch(
                    slice,
                    n,
                    &mut scratch.branch_caches[0],
                    d_out,
                    &mut grads.sets[0],
                    false,
                );
            }
        }
    }

    /// Mean squared error of the graph over a whole dataset.
    ///
    /// Evaluates in fixed-size chunks with a fixed accumulation order, so the
    /// result is deterministic for a given dataset.
    pub fn loss_on(&self, set: &TrainSet, scratch: &mut GraphScratch) -> f64 {
        const CHUNK: usize = 8192;
        assert_eq!(set.input_dim(), self.input_dim, "dataset input width");
        assert_eq!(set.target_dim(), self.output_dim, "dataset target width");
        let mut ibuf = Vec::new();
        let mut tbuf = Vec::new();
        let idx: Vec<usize> = (0..set.len()).collect();
        let mut acc = 0.0;
        for chunk in idx.chunks(CHUNK) {
            set.gather(chunk, &mut ibuf, &mut tbuf);
            self.forward_batch(&ibuf, chunk.len(), scratch);
            let out = self.output(scratch);
            for (&o, &t) in out.iter().zip(tbuf.iter()) {
                let d = o - t;
                acc += d * d;
            }
        }
        acc / (set.len() * self.output_dim) as f64
    }

    /// Batched evaluation over a dataset's inputs, returning outputs as one
    /// row per sample.
    pub fn predict_set(&self, set: &TrainSet, scratch: &mut GraphScratch) -> Vec<Vec<f64>> {
        const CHUNK: usize = 8192;
        assert_eq!(set.input_dim(), self.input_dim, "dataset input width");
        let mut ibuf = Vec::new();
        let mut tbuf = Vec::new();
        let idx: Vec<usize> = (0..set.len()).collect();
        let mut rows = Vec::with_capacity(set.len());
        let m = self.output_dim;
        for chunk in idx.chunks(CHUNK) {
            set.gather(chunk, &mut ibuf, &mut tbuf);
            self.forward_batch(&ibuf, chunk.len(), scratch);
            let out = self.output(scratch);
            let n = chunk.len();
            for b in 0..n {
                rows.push((0..m).map(|o| out[o * n + b]).collect());
            }
        }
        rows
    }
}

/// Reusable buffers for batched graph passes.
#[derive(Debug, Default, Clone)]
pub struct GraphScratch {
    branch_caches: Vec<BatchCache>,
    trunk_cache: BatchCache,
    trunk_input: Vec<f64>,
}

impl GraphScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Gradients for a graph's trainable networks, in the same order as
/// `TrainGraph::trainable_nets_mut`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphGrads {
    pub sets: Vec<GradientSet>,
}

impl GraphGrads {
    pub fn zeros_like(graph: &TrainGraph) -> Self {
        let mut sets: Vec<GradientSet> = graph
            .branches()
            .iter()
            .filter(|b| b.trainable)
            .map(|b| GradientSet::zeros_like(&b.net))
            .collect();
        if let Some(t) = graph.trunk() {
            sets.push(GradientSet::zeros_like(t));
        }
        Self { sets }
    }

    pub fn reset(&mut self) {
        for s in &mut self.sets {
            s.reset();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::ActivationKind;
    use crate::nn::network::LayerSpec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn feature_major(rows: &[Vec<f64>]) -> Vec<f64> {
        let n = rows.len();
        let d = rows[0].len();
        let mut buf = vec![0.0; d * n];
        for (b, row) in rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                buf[i * n + b] = v;
            }
        }
        buf
    }

    fn two_branch_graph() -> TrainGraph {
        // Branches consume overlapping windows of a 4-wide input.
        let b0 = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(3, ActivationKind::Relu),
                LayerSpec::new(2, ActivationKind::Relu),
            ],
            10,
        )
        .unwrap();
        let b1 = MlpNetwork::init(3, &[LayerSpec::new(2, ActivationKind::Relu)], 11).unwrap();
        let trunk = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(3, ActivationKind::Relu),
                LayerSpec::new(2, ActivationKind::Linear),
            ],
            12,
        )
        .unwrap();
        TrainGraph::branch_trunk(
            vec![TrainBranch::new(b0, 0, true), TrainBranch::new(b1, 1, false)],
            trunk,
        )
        .unwrap()
    }

    #[test]
    fn branch_trunk_rejects_mismatched_trunk_width() {
        let b = MlpNetwork::init(2, &[LayerSpec::new(2, ActivationKind::Relu)], 0).unwrap();
        let trunk = MlpNetwork::init(3, &[LayerSpec::new(1, ActivationKind::Linear)], 1).unwrap();
        assert!(TrainGraph::branch_trunk(vec![TrainBranch::new(b, 0, true)], trunk).is_err());
    }

    #[test]
    fn graph_predict_matches_manual_composition() {
        let graph = two_branch_graph();
        let x = [0.3, -0.7, 1.2, 0.4];
        let y0 = graph.branches()[0].net.forward(&x).unwrap();
        let y1 = graph.branches()[1].net.forward(&x[1..4]).unwrap();
        let mut concat = y0.clone();
        concat.extend(y1);
        let want = graph.trunk().unwrap().forward(&concat).unwrap();
        let got = graph.predict(&x).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn graph_batch_forward_matches_predict_bitwise() {
        let graph = two_branch_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..23)
            .map(|_| (0..4).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let input = feature_major(&rows);
        let mut scratch = GraphScratch::new();
        graph.forward_batch(&input, rows.len(), &mut scratch);
        let out = graph.output(&scratch);
        let n = rows.len();
        for (b, row) in rows.iter().enumerate() {
            let single = graph.predict(row).unwrap();
            for (o, &sv) in single.iter().enumerate() {
                assert_eq!(sv.to_bits(), out[o * n + b].to_bits());
            }
        }
    }

    /// Central finite differences over every trainable parameter of a graph.
    fn fd_grads(graph: &TrainGraph, rows: &[Vec<f64>], targets: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let loss = |g: &TrainGraph| -> f64 {
            let mut acc = 0.0;
            for (x, t) in rows.iter().zip(targets) {
                let y = g.predict(x).unwrap();
                for (yo, to) in y.iter().zip(t) {
                    acc += (yo - to) * (yo - to);
                }
            }
            acc / (rows.len() * targets[0].len()) as f64
        };
        let h = 1e-5;
        let mut out = Vec::new();
        // Trainable branches first, then trunk, matching gradient order.
        let nb = graph.branches().len();
        for sel in 0..=nb {
            let (is_branch, trainable) = if sel < nb {
                (true, graph.branches()[sel].trainable)
            } else {
                (false, graph.trunk().is_some())
            };
            if !trainable {
                continue;
            }
            let count = if is_branch {
                graph.branches()[sel].net.param_count()
            } else {
                graph.trunk().unwrap().param_count()
            };
            let mut g = vec![0.0; count];
            for (p, slot) in g.iter_mut().enumerate() {
                let mut plus = graph.clone();
                let mut minus = graph.clone();
                for (gr, sign) in [(&mut plus, h), (&mut minus, -h)] {
                    let net = if is_branch {
                        &mut gr.branches[sel].net
                    } else {
                        gr.trunk.as_mut().unwrap()
                    };
                    let mut k = p;
                    for layer in net.layers_mut() {
                        let nw = layer.weights().len();
                        if k < nw {
                            layer.weights_mut()[k] += sign;
                            break;
                        }
                        k -= nw;
                        let nbias = layer.biases().len();
                        if k < nbias {
                            layer.biases_mut()[k] += sign;
                            break;
                        }
                        k -= nbias;
                    }
                }
                *slot = (loss(&plus) - loss(&minus)) / (2.0 * h);
            }
            out.push(g);
        }
        out
    }

    #[test]
    fn graph_backward_matches_finite_differences() {
        // Sigmoid/linear graph keeps the loss smooth so central differences
        // are a valid oracle.
        let b0 = MlpNetwork::init(
            4,
            &[
                LayerSpec::new(3, ActivationKind::Sigmoid),
                LayerSpec::new(2, ActivationKind::Sigmoid),
            ],
            20,
        )
        .unwrap();
        let b1 = MlpNetwork::init(4, &[LayerSpec::new(1, ActivationKind::Sigmoid)], 21).unwrap();
        let trunk = MlpNetwork::init(
            3,
            &[
                LayerSpec::new(3, ActivationKind::Sigmoid),
                LayerSpec::new(2, ActivationKind::Linear),
            ],
            22,
        )
        .unwrap();
        let graph = TrainGraph::branch_trunk(
            vec![TrainBranch::new(b0, 0, true), TrainBranch::new(b1, 0, false)],
            trunk,
        )
        .unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        let n = rows.len();
        let input = feature_major(&rows);
        let mut scratch = GraphScratch::new();
        graph.forward_batch(&input, n, &mut scratch);
        let mut d_out = vec![0.0; 2 * n];
        let scale = 2.0 / (2 * n) as f64;
        {
            let out = graph.output(&scratch);
            for (b, t) in targets.iter().enumerate() {
                for (o, &tv) in t.iter().enumerate() {
                    d_out[o * n + b] = scale * (out[o * n + b] - tv);
                }
            }
        }
        let mut grads = GraphGrads::zeros_like(&graph);
        graph.backward_batch(&input, n, &mut scratch, &d_out, &mut grads);

        let fd = fd_grads(&graph, &rows, &targets);
        assert_eq!(fd.len(), grads.sets.len());
        for (set, fd_set) in grads.sets.iter().zip(&fd) {
            let flat: Vec<f64> = set
                .weights
                .iter()
                .zip(&set.biases)
                .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
                .collect();
            assert_eq!(flat.len(), fd_set.len());
            for (&a, &f) in flat.iter().zip(fd_set) {
                let denom = f.abs().max(1e-6);
                assert!(
                    (a - f).abs() / denom <= 1e-4,
                    "analytic {a} vs finite-difference {f}"
                );
            }
        }
    }

    #[test]
    fn frozen_branch_gets_no_gradient_slot() {
        let graph = two_branch_graph();
        let grads = GraphGrads::zeros_like(&graph);
        // One trainable branch plus the trunk.
        assert_eq!(grads.sets.len(), 2);
    }

    #[test]
    fn trainset_gather_transposes() {
        let set = TrainSet::from_rows(
            &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            &[vec![0.0], vec![1.0], vec![0.5]],
        )
        .unwrap();
        let mut ib = Vec::new();
        let mut tb = Vec::new();
        set.gather(&[2, 0], &mut ib, &mut tb);
        assert_eq!(ib, vec![5.0, 1.0, 6.0, 2.0]);
        assert_eq!(tb, vec![0.5, 0.0]);
    }

    #[test]
    fn trainset_rejects_ragged_flat_input() {
        assert!(TrainSet::new(vec![1.0, 2.0, 3.0], vec![0.0], 2, 1).is_err());
    }
}
