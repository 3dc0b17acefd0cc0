//! Equicorrelated Gaussian copula over sensors.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::DatagenError;

/// Shape and strength of the cross-sensor dependence.
///
/// For each feature, the sensor vector has covariance `(1−α)I + α11ᵀ`;
/// distinct features are independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub alpha: f64,
    pub n_sensors: usize,
    pub n_features: usize,
}

impl CopulaSpec {
    pub fn new(alpha: f64, n_sensors: usize, n_features: usize) -> Result<Self, DatagenError> {
        if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
            return Err(DatagenError::InvalidSpec(format!(
                "alpha must be in [0, 1], got {alpha}"
            )));
        }
        if n_sensors == 0 || n_features == 0 {
            return Err(DatagenError::InvalidSpec(
                "sensor and feature counts must be >= 1".into(),
            ));
        }
        Ok(Self {
            alpha,
            n_sensors,
            n_features,
        })
    }
}

/// Draws one sensor × feature matrix of correlated standard normals,
/// row-major (`out[n * K + k]`).
///
/// Shared-factor construction: `v[n][k] = √α·z[k] + √(1−α)·w[n][k]` with
/// independent standard normals z and w, so α = 0 and α = 1 are exact and
/// each entry is marginally standard normal for every α.
pub fn sample_copula_matrix(spec: &CopulaSpec, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; spec.n_sensors * spec.n_features];
    sample_copula_matrix_into(spec, rng, &mut out);
    out
}

/// As [`sample_copula_matrix`], writing into a caller buffer.
pub fn sample_copula_matrix_into(spec: &CopulaSpec, rng: &mut impl Rng, out: &mut [f64]) {
    assert_eq!(out.len(), spec.n_sensors * spec.n_features, "matrix shape");
    let sa = spec.alpha.sqrt();
    let sw = (1.0 - spec.alpha).sqrt();
    // Fixed draw order: the K shared factors, then w row-major.
    let shared: Vec<f64> = (0..spec.n_features)
        .map(|_| sa * rng.sample::<f64, _>(StandardNormal))
        .collect();
    for n in 0..spec.n_sensors {
        for k in 0..spec.n_features {
            let w: f64 = rng.sample(StandardNormal);
            out[n * spec.n_features + k] = shared[k] + sw * w;
        }
    }
}
