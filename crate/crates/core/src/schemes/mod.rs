//! The four authentication schemes: local training (AE, LD, CLDAE) and
//! globally trained sensor/sink stacks.
//!
//! Every scheme compresses each sensor's 4 channel features into an M-wide
//! code and fuses the codes at the sink into a scalar authenticity score.
//! The schemes differ in how the compressors are obtained:
//!
//! * `AE`: per-sensor autoencoder; the code is the reconstruction
//!   bottleneck, trained without labels.
//! * `LD`: per-sensor scalar soft decision trained against labels (M = 1).
//! * `CLDAE`: code = frozen LD score plus M-1 reconstruction-oriented
//!   entries trained as an autoencoder around the fixed score.
//! * `GLOBAL`: per-sensor subnetworks and the sink trained end-to-end as
//!   one labeled network.

mod arch;
mod bundle;
mod data;
mod fusion;
mod global;
mod local;
mod scale;

pub use arch::{
    autoencoder_stack, decoder_network, fusion_network, ld_network, residual_network,
    split_autoencoder, AE_ENCODER_LAYERS, SENSOR_FEATURES,
};
pub use bundle::{AuthenticatorBundle, BundleMeta, BUNDLE_FORMAT_VERSION};
pub use data::{rows_labeled, sensor_features, sensor_features_scaled, sensor_labeled};
pub use fusion::{encode_dataset, train_fusion, LocalEncoder};
pub use scale::FeatureScaler;
pub use global::{
    parse_global_config, train_global, GlobalConfig, GlobalTrained, STANDARD_NEURON_BUDGET,
};
pub use local::{
    train_ae_local, train_cldae_local, train_cldae_stage2, train_ld_local, AeLocal, CldaeLocal,
    LdLocal, Stage2Mode,
};

use serde::{Deserialize, Serialize};

/// Errors raised while building or training schemes.
#[derive(Debug, thiserror::Error)]
pub enum SchemeError {
    /// Structurally invalid request (widths, M out of range, mismatches).
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    /// Failure inside network construction or training.
    #[error(transparent)]
    Train(#[from] crate::nn::NnError),
    /// Failure while deriving datasets (scaling, splitting).
    #[error(transparent)]
    Data(#[from] crate::datagen::DatagenError),
    /// Failure while turning fused scores into a score set.
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    /// Bundle (de)serialization failure.
    #[error("bundle serialization error: {0}")]
    Serde(String),
    /// Filesystem failure while loading or saving bundles.
    #[error("io error: {0}")]
    Io(String),
}

/// Scheme identifiers as they appear in configs and result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SchemeKind {
    Ae,
    Ld,
    Cldae,
    Global,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Ae => "AE",
            SchemeKind::Ld => "LD",
            SchemeKind::Cldae => "CLDAE",
            SchemeKind::Global => "GLOBAL",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AE" => Ok(SchemeKind::Ae),
            "LD" => Ok(SchemeKind::Ld),
            "CLDAE" => Ok(SchemeKind::Cldae),
            "GLOBAL" => Ok(SchemeKind::Global),
            other => Err(SchemeError::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Folds degenerate scheme requests onto their canonical form before any
/// seed derivation or training: CLDAE with M = 1 has no residual entries and
/// IS the LD scheme, and LD always has M = 1.
pub fn canonical_scheme(kind: SchemeKind, m: usize) -> (SchemeKind, usize) {
    match kind {
        SchemeKind::Cldae if m <= 1 => (SchemeKind::Ld, 1),
        SchemeKind::Ld => (SchemeKind::Ld, 1),
        other => (other, m),
    }
}
