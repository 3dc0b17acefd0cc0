//! Network builders for the fixed scheme architectures.
//!
//! All hidden layers use ReLU. Output layers are ReLU where the output is a
//! code consumed by another network, Sigmoid where it is a soft decision,
//! and Linear where it is a reconstruction.

use crate::nn::{ActivationKind, LayerSpec, MlpNetwork};

use super::SchemeError;

/// Channel features per sensor (fixed input width of every local network).
pub const SENSOR_FEATURES: usize = 4;

/// Trainable layers in the encoder half of [`autoencoder_stack`].
pub const AE_ENCODER_LAYERS: usize = 4;

/// Widest code any local compressor may produce (the feature vector itself
/// has 4 entries, so wider codes would not compress).
const MAX_LOCAL_CODE: usize = 3;

fn relu(width: usize) -> LayerSpec {
    LayerSpec::new(width, ActivationKind::Relu)
}

fn check_code_width(m: usize) -> Result<(), SchemeError> {
    if !(1..=MAX_LOCAL_CODE).contains(&m) {
        return Err(SchemeError::Config(format!(
            "code width M must be in 1..={MAX_LOCAL_CODE}, got {m}"
        )));
    }
    Ok(())
}

/// Encoder and mirrored decoder as one trainable stack:
/// widths `4,3,3,M` then `M,3,3,4`, Linear reconstruction output.
///
/// Split the trained stack with [`split_autoencoder`].
pub fn autoencoder_stack(m: usize, seed: u64) -> Result<MlpNetwork, SchemeError> {
    check_code_width(m)?;
    let specs = [
        relu(4),
        relu(3),
        relu(3),
        relu(m),
        relu(m),
        relu(3),
        relu(3),
        LayerSpec::new(SENSOR_FEATURES, ActivationKind::Linear),
    ];
    Ok(MlpNetwork::init(SENSOR_FEATURES, &specs, seed)?)
}

/// Splits an [`autoencoder_stack`] into (encoder, decoder).
pub fn split_autoencoder(stack: &MlpNetwork) -> Result<(MlpNetwork, MlpNetwork), SchemeError> {
    Ok(stack.split_at(AE_ENCODER_LAYERS)?)
}

/// Scalar soft-decision network: widths `4,3,2,1`, Sigmoid output.
pub fn ld_network(seed: u64) -> Result<MlpNetwork, SchemeError> {
    let specs = [
        relu(4),
        relu(3),
        relu(2),
        LayerSpec::new(1, ActivationKind::Sigmoid),
    ];
    Ok(MlpNetwork::init(SENSOR_FEATURES, &specs, seed)?)
}

/// Residual compressor of the combined scheme: widths `4,3,M-1`, all ReLU.
/// Its outputs fill the code entries after the frozen score, so M >= 2.
pub fn residual_network(m: usize, seed: u64) -> Result<MlpNetwork, SchemeError> {
    check_code_width(m)?;
    if m < 2 {
        return Err(SchemeError::Config(
            "residual network needs M >= 2 (M = 1 is the LD scheme)".into(),
        ));
    }
    let specs = [relu(4), relu(3), relu(m - 1)];
    Ok(MlpNetwork::init(SENSOR_FEATURES, &specs, seed)?)
}

/// Reconstruction decoder: widths `M,3,3,4`, Linear output.
pub fn decoder_network(m: usize, seed: u64) -> Result<MlpNetwork, SchemeError> {
    check_code_width(m)?;
    let specs = [
        relu(m),
        relu(3),
        relu(3),
        LayerSpec::new(SENSOR_FEATURES, ActivationKind::Linear),
    ];
    Ok(MlpNetwork::init(m, &specs, seed)?)
}

/// Sink fusion network over `n` sensor codes of width `m`:
/// input `M*N`, widths `M*N, N, 1`, Sigmoid output.
pub fn fusion_network(m: usize, n: usize, seed: u64) -> Result<MlpNetwork, SchemeError> {
    if m == 0 || n == 0 {
        return Err(SchemeError::Config(
            "fusion needs at least one sensor and a positive code width".into(),
        ));
    }
    let specs = [
        relu(m * n),
        relu(n),
        LayerSpec::new(1, ActivationKind::Sigmoid),
    ];
    Ok(MlpNetwork::init(m * n, &specs, seed)?)
}
