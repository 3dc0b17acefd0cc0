//! Code extraction at the sensors and fusion training at the sink.

use serde::{Deserialize, Serialize};

use crate::datagen::FeatureDataset;
use crate::nn::{train, BatchCache, MlpNetwork, TrainConfig, TrainReport, TrainSet};
use crate::seeding;

use super::arch::fusion_network;
use super::SchemeError;

/// Rows encoded per forward pass when walking a dataset.
const ENCODE_CHUNK: usize = 8192;

/// One sensor's trained compressor: maps the 4 channel features to an
/// M-wide code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocalEncoder {
    /// Autoencoder bottleneck encoder.
    Ae { encoder: MlpNetwork },
    /// Scalar soft-decision network (M = 1).
    Ld { net: MlpNetwork },
    /// Frozen soft-decision score concatenated with residual entries.
    Cldae {
        score: MlpNetwork,
        residual: MlpNetwork,
    },
    /// Local half of a globally trained network.
    Subnet { net: MlpNetwork },
}

impl LocalEncoder {
    pub fn code_width(&self) -> usize {
        match self {
            LocalEncoder::Ae { encoder } => encoder.output_dim(),
            LocalEncoder::Ld { .. } => 1,
            LocalEncoder::Cldae { residual, .. } => 1 + residual.output_dim(),
            LocalEncoder::Subnet { net } => net.output_dim(),
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            LocalEncoder::Ae { encoder } => encoder.input_dim(),
            LocalEncoder::Ld { net } => net.input_dim(),
            LocalEncoder::Cldae { score, .. } => score.input_dim(),
            LocalEncoder::Subnet { net } => net.input_dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LocalEncoder::Ae { .. } => "AE",
            LocalEncoder::Ld { .. } => "LD",
            LocalEncoder::Cldae { .. } => "CLDAE",
            LocalEncoder::Subnet { .. } => "GLOBAL",
        }
    }

    /// Validates internal shape consistency (used after deserialization).
    pub fn validate(&self) -> Result<(), SchemeError> {
        if let LocalEncoder::Cldae { score, residual } = self {
            if score.output_dim() != 1 {
                return Err(SchemeError::Config(
                    "combined encoder score output must be scalar".into(),
                ));
            }
            if score.input_dim() != residual.input_dim() {
                return Err(SchemeError::Config(
                    "combined encoder parts disagree on input width".into(),
                ));
            }
        }
        Ok(())
    }

    /// Encodes one feature vector.
    pub fn encode(&self, features: &[f64]) -> Result<Vec<f64>, SchemeError> {
        if features.len() != self.input_width() {
            return Err(SchemeError::Config(format!(
                "encoder expects {} features, got {}",
                self.input_width(),
                features.len()
            )));
        }
        match self {
            LocalEncoder::Ae { encoder } => Ok(encoder.forward(features)?),
            LocalEncoder::Ld { net } | LocalEncoder::Subnet { net } => {
                Ok(net.forward(features)?)
            }
            LocalEncoder::Cldae { score, residual } => {
                let mut code = score.forward(features)?;
                code.extend(residual.forward(features)?);
                Ok(code)
            }
        }
    }

    /// Encodes a feature-major block of `count` samples into a feature-major
    /// code block of `code_width() * count` values.
    fn encode_block(
        &self,
        input: &[f64],
        count: usize,
        scratch: &mut EncodeScratch,
        out: &mut [f64],
    ) {
        debug_assert_eq!(out.len(), self.code_width() * count);
        match self {
            LocalEncoder::Ae { encoder } => {
                encoder.forward_batch(input, count, &mut scratch.primary);
                out.copy_from_slice(scratch.primary.output());
            }
            LocalEncoder::Ld { net } | LocalEncoder::Subnet { net } => {
                net.forward_batch(input, count, &mut scratch.primary);
                out.copy_from_slice(scratch.primary.output());
            }
            LocalEncoder::Cldae { score, residual } => {
                score.forward_batch(input, count, &mut scratch.primary);
                out[..count].copy_from_slice(scratch.primary.output());
                residual.forward_batch(input, count, &mut scratch.secondary);
                out[count..].copy_from_slice(scratch.secondary.output());
            }
        }
    }
}

struct EncodeScratch {
    primary: BatchCache,
    secondary: BatchCache,
}

impl EncodeScratch {
    fn new() -> Self {
        Self {
            primary: BatchCache::new(),
            secondary: BatchCache::new(),
        }
    }
}

fn check_encoder_grid(
    encoders: &[LocalEncoder],
    ds: &FeatureDataset,
) -> Result<usize, SchemeError> {
    if encoders.is_empty() {
        return Err(SchemeError::Config("no encoders supplied".into()));
    }
    if encoders.len() != ds.n_sensors() {
        return Err(SchemeError::Config(format!(
            "{} encoders for {} sensors",
            encoders.len(),
            ds.n_sensors()
        )));
    }
    let m = encoders[0].code_width();
    for (i, enc) in encoders.iter().enumerate() {
        enc.validate()?;
        if enc.code_width() != m {
            return Err(SchemeError::Config(format!(
                "encoder {i} produces {} code entries, encoder 0 produces {m}",
                enc.code_width()
            )));
        }
        if enc.input_width() != ds.n_features() {
            return Err(SchemeError::Config(format!(
                "encoder {i} expects {} features, dataset provides {}",
                enc.input_width(),
                ds.n_features()
            )));
        }
    }
    Ok(m)
}

/// Runs every row of `ds` through the per-sensor encoders and returns the
/// sensor-major concatenated codes `[y_1, ..., y_N]` with the authenticity
/// label as scalar target.
pub fn encode_dataset(
    encoders: &[LocalEncoder],
    ds: &FeatureDataset,
) -> Result<TrainSet, SchemeError> {
    let m = check_encoder_grid(encoders, ds)?;
    let n_sensors = encoders.len();
    let k = ds.n_features();
    let width = m * n_sensors;
    let mut codes = vec![0.0; ds.len() * width];
    let mut targets = Vec::with_capacity(ds.len());
    let mut input = Vec::new();
    let mut block = Vec::new();
    let mut scratch = EncodeScratch::new();
    for start in (0..ds.len()).step_by(ENCODE_CHUNK) {
        let count = ENCODE_CHUNK.min(ds.len() - start);
        for (sensor, encoder) in encoders.iter().enumerate() {
            let col = ds.column(sensor, 0);
            input.resize(k * count, 0.0);
            for j in 0..count {
                let row = &ds.row(start + j)[col..col + k];
                for (f, &v) in row.iter().enumerate() {
                    input[f * count + j] = v;
                }
            }
            block.resize(m * count, 0.0);
            encoder.encode_block(&input, count, &mut scratch, &mut block);
            for c in 0..m {
                let dest_col = sensor * m + c;
                for j in 0..count {
                    codes[(start + j) * width + dest_col] = block[c * count + j];
                }
            }
        }
    }
    for i in 0..ds.len() {
        targets.push(ds.label(i) as f64);
    }
    Ok(TrainSet::new(codes, targets, width, 1)?)
}

/// Per-column mean and standard deviation of a code set. Columns with
/// (near-)constant codes keep scale 1 so they pass through unchanged.
fn code_stats(codes: &TrainSet) -> (Vec<f64>, Vec<f64>) {
    let dim = codes.input_dim();
    let n = codes.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in codes.inputs().chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for row in codes.inputs().chunks_exact(dim) {
        for ((s, m), v) in var.iter_mut().zip(&mean).zip(row) {
            let d = v - m;
            *s += d * d;
        }
    }
    let scale = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-9 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn standardize_codes(
    codes: &TrainSet,
    shift: &[f64],
    scale: &[f64],
) -> Result<TrainSet, SchemeError> {
    let dim = codes.input_dim();
    let mut inputs = codes.inputs().to_vec();
    for row in inputs.chunks_exact_mut(dim) {
        for ((v, m), s) in row.iter_mut().zip(shift).zip(scale) {
            *v = (*v - m) / s;
        }
    }
    Ok(TrainSet::new(
        inputs,
        codes.targets().to_vec(),
        dim,
        codes.target_dim(),
    )?)
}

/// Rewrites the first layer so the network applies `(x - shift) / scale`
/// itself: training sees standardized codes while deployment keeps feeding
/// raw encoder outputs.
fn absorb_input_standardization(net: &mut MlpNetwork, shift: &[f64], scale: &[f64]) {
    let layer = &mut net.layers_mut()[0];
    let in_dim = layer.in_dim();
    let width = layer.width();
    let mut corrections = vec![0.0; width];
    {
        let weights = layer.weights_mut();
        for j in 0..width {
            for i in 0..in_dim {
                let w = weights[j * in_dim + i] / scale[i];
                weights[j * in_dim + i] = w;
                corrections[j] += w * shift[i];
            }
        }
    }
    for (b, c) in layer.biases_mut().iter_mut().zip(&corrections) {
        *b -= c;
    }
}

/// Trains the sink fusion network on the codes of frozen encoders.
///
/// Codes are standardized per column with training-split statistics before
/// training; the affine map is folded back into the first layer afterwards,
/// so the returned network still consumes raw codes. Without this the sink
/// sigmoid saturates whenever an encoder emits large-magnitude codes.
pub fn train_fusion(
    encoders: &[LocalEncoder],
    train_ds: &FeatureDataset,
    val_ds: &FeatureDataset,
    cfg: &TrainConfig,
) -> Result<(MlpNetwork, TrainReport), SchemeError> {
    let m = check_encoder_grid(encoders, train_ds)?;
    check_encoder_grid(encoders, val_ds)?;
    let train_codes = encode_dataset(encoders, train_ds)?;
    let val_codes = encode_dataset(encoders, val_ds)?;
    let (shift, scale) = code_stats(&train_codes);
    let train_codes = standardize_codes(&train_codes, &shift, &scale)?;
    let val_codes = standardize_codes(&val_codes, &shift, &scale)?;
    let net = fusion_network(
        m,
        encoders.len(),
        seeding::derive(cfg.seed, &["init", "fusion"]),
    )?;
    let (mut net, report) = train(net, &train_codes, &val_codes, cfg)?;
    absorb_input_standardization(&mut net, &shift, &scale);
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{optimize_threshold, ScoreSet};
    use crate::nn::{ActivationKind, LayerSpec, Optimizer};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn constant_encoder(biases: [f64; 2]) -> LocalEncoder {
        let mut net =
            MlpNetwork::zeros(4, &[LayerSpec::new(2, ActivationKind::Linear)]).unwrap();
        net.layers_mut()[0].biases_mut().copy_from_slice(&biases);
        LocalEncoder::Subnet { net }
    }

    fn random_dataset(rows_per_class: usize, sensors: usize, seed: u64) -> FeatureDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = sensors * 4;
        let features: Vec<f64> = (0..2 * rows_per_class * width)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let labels: Vec<u8> = (0..2 * rows_per_class)
            .map(|i| u8::from(i < rows_per_class))
            .collect();
        FeatureDataset::from_parts(sensors, 4, 0.0, "noise".into(), features, labels).unwrap()
    }

    fn mixed_encoders(seed: u64) -> Vec<LocalEncoder> {
        vec![
            LocalEncoder::Ae {
                encoder: super::super::arch::autoencoder_stack(2, seed)
                    .and_then(|s| super::super::arch::split_autoencoder(&s))
                    .map(|(e, _)| e)
                    .unwrap(),
            },
            LocalEncoder::Cldae {
                score: super::super::arch::ld_network(seed + 1).unwrap(),
                residual: super::super::arch::residual_network(2, seed + 2).unwrap(),
            },
            LocalEncoder::Subnet {
                net: MlpNetwork::init(
                    4,
                    &[
                        LayerSpec::new(3, ActivationKind::Relu),
                        LayerSpec::new(2, ActivationKind::Relu),
                    ],
                    seed + 3,
                )
                .unwrap(),
            },
        ]
    }

    #[test]
    fn codes_are_concatenated_sensor_major() {
        let encoders = vec![constant_encoder([1.0, 2.0]), constant_encoder([3.0, 4.0])];
        let ds = random_dataset(3, 2, 1);
        let codes = encode_dataset(&encoders, &ds).unwrap();
        assert_eq!(codes.input_dim(), 4);
        for i in 0..codes.len() {
            assert_eq!(codes.input_row(i), &[1.0, 2.0, 3.0, 4.0]);
        }
        assert_eq!(codes.target_row(0), &[1.0]);
        assert_eq!(codes.target_row(5), &[0.0]);
    }

    #[test]
    fn block_encoding_matches_per_sample_encoding_bitwise() {
        let encoders = mixed_encoders(77);
        let ds = random_dataset(200, 3, 5);
        let codes = encode_dataset(&encoders, &ds).unwrap();
        for i in (0..ds.len()).step_by(37) {
            let row = ds.row(i);
            let mut expected = Vec::new();
            for (n, enc) in encoders.iter().enumerate() {
                expected.extend(enc.encode(&row[n * 4..(n + 1) * 4]).unwrap());
            }
            let got = codes.input_row(i);
            let eb: Vec<u64> = expected.iter().map(|v| v.to_bits()).collect();
            let gb: Vec<u64> = got.iter().map(|v| v.to_bits()).collect();
            assert_eq!(eb, gb, "row {i} diverged between batch and single paths");
        }
    }

    #[test]
    fn code_width_mismatch_is_rejected() {
        let encoders = vec![
            constant_encoder([1.0, 2.0]),
            LocalEncoder::Ld {
                net: super::super::arch::ld_network(1).unwrap(),
            },
        ];
        let ds = random_dataset(3, 2, 1);
        match encode_dataset(&encoders, &ds) {
            Err(SchemeError::Config(msg)) => assert!(msg.contains("code entries")),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn absorbed_affine_matches_explicit_standardization() {
        let mut net = MlpNetwork::init(
            3,
            &[
                LayerSpec::new(4, ActivationKind::Relu),
                LayerSpec::new(1, ActivationKind::Sigmoid),
            ],
            99,
        )
        .unwrap();
        let reference = net.clone();
        let shift = [2.0, -1.5, 40.0];
        let scale = [0.5, 3.0, 12.0];
        absorb_input_standardization(&mut net, &shift, &scale);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..32 {
            let x: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let std_x: Vec<f64> = x
                .iter()
                .zip(shift.iter().zip(&scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect();
            let got = net.forward(&x).unwrap()[0];
            let want = reference.forward(&std_x).unwrap()[0];
            assert!(
                (got - want).abs() <= 1e-12,
                "folded net {got} vs standardized input {want}"
            );
        }
    }

    #[test]
    fn fusion_trains_on_badly_scaled_codes() {
        // Passthrough encoders that blow one code column up by 500x: the raw
        // codes would saturate the sink sigmoid at initialization.
        let mut encoders = Vec::new();
        for sensor in 0..2 {
            let mut net =
                MlpNetwork::zeros(4, &[LayerSpec::new(1, ActivationKind::Linear)]).unwrap();
            let gain = if sensor == 0 { 500.0 } else { 1.0 };
            net.layers_mut()[0].weights_mut()[0] = gain;
            encoders.push(LocalEncoder::Subnet { net });
        }
        let make = |rows: usize, seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let width = 2 * 4;
            let mut features = Vec::with_capacity(2 * rows * width);
            let mut labels = Vec::with_capacity(2 * rows);
            for i in 0..2 * rows {
                let label = u8::from(i < rows);
                let offset = if label == 1 { 1.5 } else { 0.0 };
                for _ in 0..width {
                    features.push(rng.sample::<f64, _>(StandardNormal) + offset);
                }
                labels.push(label);
            }
            FeatureDataset::from_parts(2, 4, 0.0, "scaled".into(), features, labels).unwrap()
        };
        let cfg = TrainConfig {
            learning_rate: 3e-3,
            epochs: 40,
            batch_size: 128,
            optimizer: Optimizer::Adam,
            seed: 8,
            early_stop_patience: 0,
        };
        let (net, _) = train_fusion(&encoders, &make(1500, 31), &make(500, 32), &cfg).unwrap();
        let test_ds = make(2000, 33);
        let test_codes = encode_dataset(&encoders, &test_ds).unwrap();
        let entries: Vec<(f64, u8)> = (0..test_codes.len())
            .map(|i| {
                let z = net.forward(test_codes.input_row(i)).unwrap()[0];
                (z, test_codes.target_row(i)[0] as u8)
            })
            .collect();
        let scores = ScoreSet::new(entries).unwrap();
        let (_, eps) = optimize_threshold(&scores).unwrap();
        assert!(
            eps <= 0.2,
            "separable codes fused to error {eps} despite standardization"
        );
    }

    #[test]
    fn informationless_codes_fuse_to_chance() {
        let encoders = mixed_encoders(13);
        let train_ds = random_dataset(1500, 3, 21);
        let val_ds = random_dataset(500, 3, 22);
        let test_ds = random_dataset(2000, 3, 23);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 128,
            optimizer: Optimizer::Adam,
            seed: 3,
            early_stop_patience: 0,
        };
        let (net, _) = train_fusion(&encoders, &train_ds, &val_ds, &cfg).unwrap();
        let test_codes = encode_dataset(&encoders, &test_ds).unwrap();
        let entries: Vec<(f64, u8)> = (0..test_codes.len())
            .map(|i| {
                let z = net.forward(test_codes.input_row(i)).unwrap()[0];
                (z, test_codes.target_row(i)[0] as u8)
            })
            .collect();
        let scores = ScoreSet::new(entries).unwrap();
        let (_, eps) = optimize_threshold(&scores).unwrap();
        assert!(
            (eps - 0.5).abs() <= 0.03,
            "noise fused to error {eps}, expected chance"
        );
    }
}
