//! Deployable authentication artifact: feature scaler, per-sensor encoders,
//! sink fusion network, decision threshold, and run metadata, with a
//! versioned JSON serialization shared with the experiment runner.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::FeatureDataset;
use crate::eval::ScoreSet;
use crate::nn::{BatchCache, MlpNetwork};

use super::fusion::{encode_dataset, LocalEncoder};
use super::scale::FeatureScaler;
use super::SchemeError;

/// Current bundle file format version.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Provenance of a trained bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    /// Scheme identifier as reported in result files.
    pub scheme: String,
    /// Per-sensor code width.
    pub m: usize,
    /// Cross-sensor coupling strength of the training data.
    pub alpha: f64,
    /// Base seed of the training run.
    pub seed: u64,
    /// Architecture notation for globally trained bundles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notation: Option<String>,
}

/// Complete trained authenticator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BundleRepr", into = "BundleRepr")]
pub struct AuthenticatorBundle {
    meta: BundleMeta,
    scaler: FeatureScaler,
    encoders: Vec<LocalEncoder>,
    fusion: MlpNetwork,
    lambda: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct BundleRepr {
    version: u32,
    meta: BundleMeta,
    scaler: FeatureScaler,
    encoders: Vec<LocalEncoder>,
    fusion: MlpNetwork,
    lambda: Option<f64>,
}

impl From<AuthenticatorBundle> for BundleRepr {
    fn from(b: AuthenticatorBundle) -> Self {
        Self {
            version: BUNDLE_FORMAT_VERSION,
            meta: b.meta,
            scaler: b.scaler,
            encoders: b.encoders,
            fusion: b.fusion,
            lambda: b.lambda,
        }
    }
}

impl TryFrom<BundleRepr> for AuthenticatorBundle {
    type Error = SchemeError;

    fn try_from(repr: BundleRepr) -> Result<Self, Self::Error> {
        if repr.version != BUNDLE_FORMAT_VERSION {
            return Err(SchemeError::Config(format!(
                "unsupported bundle version {} (expected {BUNDLE_FORMAT_VERSION})",
                repr.version
            )));
        }
        let mut bundle =
            AuthenticatorBundle::new(repr.meta, repr.scaler, repr.encoders, repr.fusion)?;
        if let Some(lambda) = repr.lambda {
            bundle.set_threshold(lambda)?;
        }
        Ok(bundle)
    }
}

impl AuthenticatorBundle {
    /// Assembles and validates a bundle; the threshold starts unset.
    ///
    /// The scaler maps raw physical feature rows into the standardized space
    /// the encoders were trained in; every scoring entry point applies it.
    pub fn new(
        meta: BundleMeta,
        scaler: FeatureScaler,
        encoders: Vec<LocalEncoder>,
        fusion: MlpNetwork,
    ) -> Result<Self, SchemeError> {
        if encoders.is_empty() {
            return Err(SchemeError::Config("bundle needs at least one sensor".into()));
        }
        let m = encoders[0].code_width();
        let input = encoders[0].input_width();
        for (i, enc) in encoders.iter().enumerate() {
            enc.validate()?;
            if enc.code_width() != m {
                return Err(SchemeError::Config(format!(
                    "encoder {i} produces {} code entries, encoder 0 produces {m}",
                    enc.code_width()
                )));
            }
            if enc.input_width() != input {
                return Err(SchemeError::Config(format!(
                    "encoder {i} expects {} features, encoder 0 expects {input}",
                    enc.input_width()
                )));
            }
        }
        if meta.m != m {
            return Err(SchemeError::Config(format!(
                "metadata claims M = {}, encoders produce {m}",
                meta.m
            )));
        }
        if fusion.input_dim() != m * encoders.len() {
            return Err(SchemeError::Config(format!(
                "fusion consumes {} values, encoders produce {}",
                fusion.input_dim(),
                m * encoders.len()
            )));
        }
        if fusion.output_dim() != 1 {
            return Err(SchemeError::Config(
                "fusion must output a single score".into(),
            ));
        }
        scaler.validate()?;
        if scaler.width() != input * encoders.len() {
            return Err(SchemeError::Config(format!(
                "scaler covers {} columns, encoders consume {}",
                scaler.width(),
                input * encoders.len()
            )));
        }
        Ok(Self {
            meta,
            scaler,
            encoders,
            fusion,
            lambda: None,
        })
    }

    pub fn meta(&self) -> &BundleMeta {
        &self.meta
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn encoders(&self) -> &[LocalEncoder] {
        &self.encoders
    }

    pub fn fusion(&self) -> &MlpNetwork {
        &self.fusion
    }

    pub fn n_sensors(&self) -> usize {
        self.encoders.len()
    }

    pub fn m(&self) -> usize {
        self.encoders[0].code_width()
    }

    pub fn threshold(&self) -> Option<f64> {
        self.lambda
    }

    pub fn set_threshold(&mut self, lambda: f64) -> Result<(), SchemeError> {
        if !lambda.is_finite() {
            return Err(SchemeError::Config("threshold must be finite".into()));
        }
        self.lambda = Some(lambda);
        Ok(())
    }

    /// Runs one raw sensor-major feature row through scaler, encoders, and
    /// fusion.
    pub fn encode_and_fuse(&self, features: &[f64]) -> Result<f64, SchemeError> {
        let k = self.encoders[0].input_width();
        let expected = k * self.encoders.len();
        if features.len() != expected {
            return Err(SchemeError::Config(format!(
                "feature row must hold {expected} values ({} sensors x {k}), got {}",
                self.encoders.len(),
                features.len()
            )));
        }
        let mut standardized = vec![0.0; expected];
        self.scaler.standardize_into(features, &mut standardized);
        let mut codes = Vec::with_capacity(self.m() * self.encoders.len());
        for (sensor, enc) in self.encoders.iter().enumerate() {
            codes.extend(enc.encode(&standardized[sensor * k..(sensor + 1) * k])?);
        }
        Ok(self.fusion.forward(&codes)?[0])
    }

    /// Accepts the row as legitimate iff its score reaches the threshold.
    pub fn decide(&self, features: &[f64]) -> Result<bool, SchemeError> {
        let lambda = self.lambda.ok_or_else(|| {
            SchemeError::Config("bundle has no threshold; set one before deciding".into())
        })?;
        Ok(self.encode_and_fuse(features)? >= lambda)
    }

    /// Scores every row of a raw-unit dataset, keeping its labels.
    pub fn score_dataset(&self, ds: &FeatureDataset) -> Result<ScoreSet, SchemeError> {
        let standardized = self.scaler.standardize_dataset(ds)?;
        let codes = encode_dataset(&self.encoders, &standardized)?;
        const CHUNK: usize = 8192;
        let mut cache = BatchCache::new();
        let mut input = Vec::new();
        let mut ignored = Vec::new();
        let mut entries = Vec::with_capacity(codes.len());
        for start in (0..codes.len()).step_by(CHUNK) {
            let count = CHUNK.min(codes.len() - start);
            let idx: Vec<usize> = (start..start + count).collect();
            codes.gather(&idx, &mut input, &mut ignored);
            self.fusion.forward_batch(&input, count, &mut cache);
            let out = cache.output();
            for j in 0..count {
                entries.push((out[j], ds.label(start + j)));
            }
        }
        Ok(ScoreSet::new(entries)?)
    }

    /// Writes the bundle as versioned JSON.
    pub fn save(&self, path: &Path) -> Result<(), SchemeError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| SchemeError::Serde(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| SchemeError::Io(e.to_string()))
    }

    /// Reads and validates a bundle written by [`AuthenticatorBundle::save`].
    pub fn load(path: &Path) -> Result<Self, SchemeError> {
        let text = std::fs::read_to_string(path).map_err(|e| SchemeError::Io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| SchemeError::Serde(e.to_string()))
    }
}
