//! Per-column feature standardization fitted on training data.

use serde::{Deserialize, Serialize};

use crate::datagen::FeatureDataset;

use super::SchemeError;

/// Columns with sample standard deviation below this are treated as constant
/// and passed through centered but unscaled.
const MIN_SPREAD: f64 = 1e-12;

/// Affine per-column transform bringing features to zero mean and unit
/// variance, the space every network trains in.
///
/// Fitted on the training split only; the same transform is applied to
/// validation, test, and deployment inputs. It travels with the trained
/// bundle so a deployed authenticator accepts raw physical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl FeatureScaler {
    /// Per-column mean and standard deviation of `ds`.
    pub fn fit(ds: &FeatureDataset) -> Result<Self, SchemeError> {
        if ds.is_empty() {
            return Err(SchemeError::Config(
                "cannot fit a scaler on an empty dataset".into(),
            ));
        }
        let width = ds.n_sensors() * ds.n_features();
        let n = ds.len() as f64;
        let mut mean = vec![0.0; width];
        for i in 0..ds.len() {
            for (m, &v) in mean.iter_mut().zip(ds.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; width];
        for i in 0..ds.len() {
            for ((s, &v), &m) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let scale = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd < MIN_SPREAD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    /// Identity transform of the given width (zero mean, unit scale).
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    /// Builds a scaler from explicit per-column means and scales.
    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self, SchemeError> {
        let scaler = Self { mean, scale };
        scaler.validate()?;
        Ok(scaler)
    }

    /// Number of feature columns the scaler was fitted on.
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Per-column means in raw units.
    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Per-column standard deviations in raw units.
    pub fn scales(&self) -> &[f64] {
        &self.scale
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if self.mean.len() != self.scale.len() {
            return Err(SchemeError::Config(format!(
                "scaler has {} means but {} scales",
                self.mean.len(),
                self.scale.len()
            )));
        }
        if self.mean.is_empty() {
            return Err(SchemeError::Config("scaler has zero width".into()));
        }
        for (i, (&m, &s)) in self.mean.iter().zip(&self.scale).enumerate() {
            if !m.is_finite() || !s.is_finite() || s <= 0.0 {
                return Err(SchemeError::Config(format!(
                    "scaler column {i} has mean {m}, scale {s}"
                )));
            }
        }
        Ok(())
    }

    /// Writes `(row - mean) / scale` into `out`.
    pub fn standardize_into(&self, row: &[f64], out: &mut [f64]) {
        debug_assert_eq!(row.len(), self.mean.len());
        debug_assert_eq!(out.len(), self.mean.len());
        for (((o, &v), &m), &s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }

    /// Returns a standardized copy of the dataset.
    pub fn standardize_dataset(&self, ds: &FeatureDataset) -> Result<FeatureDataset, SchemeError> {
        let width = ds.n_sensors() * ds.n_features();
        if width != self.width() {
            return Err(SchemeError::Config(format!(
                "scaler fitted on {} columns, dataset has {width}",
                self.width()
            )));
        }
        let mut features = Vec::with_capacity(ds.len() * width);
        for i in 0..ds.len() {
            for ((&v, &m), &s) in ds.row(i).iter().zip(&self.mean).zip(&self.scale) {
                features.push((v - m) / s);
            }
        }
        let labels = (0..ds.len()).map(|i| ds.label(i)).collect();
        Ok(FeatureDataset::from_parts(
            ds.n_sensors(),
            ds.n_features(),
            ds.alpha(),
            format!("{} [standardized]", ds.provenance()),
            features,
            labels,
        )?)
    }

    /// Standard deviations of one sensor's feature block, used as elementwise
    /// target scales when reconstruction losses are kept in raw units.
    pub fn sensor_scales(&self, sensor: usize, n_features: usize) -> &[f64] {
        let start = sensor * n_features;
        &self.scale[start..start + n_features]
    }
}
