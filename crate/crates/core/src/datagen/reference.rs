//! Built-in synthetic channel-feature scenario.
//!
//! When no measured series are available, this module fabricates per-sensor,
//! per-feature marginals with controlled class overlap: each legitimate
//! marginal is a two-component Gaussian mixture and the attacker marginal is
//! the same family displaced by a per-(sensor, feature) offset and distorted
//! in shape (mixture weight, component gap, component spread). Feature scales
//! are deliberately heterogeneous (raw units spanning roughly two orders of
//! magnitude), sensors differ in shape and in how far the attacker sits from
//! the legitimate distribution, and the shape distortion disagrees across
//! sensors: a device transmitting from a different position changes its whole
//! multipath profile, and each receiver sees that change differently.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::bank::MarginalBank;
use super::kde::{fit_kde, BandwidthRule};
use super::DatagenError;
use crate::seeding;

/// Location and scale of each feature in raw units. The wide spread of
/// scales is intentional: it penalizes pipelines that treat reconstruction
/// error in raw units as if all features mattered equally.
const FEATURE_LOC_SCALE: [(f64, f64); 4] = [(8.0, 1.0), (0.55, 0.07), (42.0, 5.5), (3.1, 0.4)];

/// Per-feature attacker displacement in units of the marginal's own standard
/// deviation, before sensor quality weighting. The strongest displacement sits
/// on the smallest-scale feature and the weakest on the largest-scale one, so
/// raw-unit reconstruction fidelity and authentication value pull in opposite
/// directions.
const FEATURE_DETECTABILITY: [f64; 4] = [1.77, 1.76, 1.64, 1.79];

/// Multiplier on the attacker displacement per sensor; sensors cycle through
/// this table, so sensor 0 is the most discriminative. The spread is narrow:
/// every per-(sensor, feature) overlap must stay in the same moderate band,
/// and the fused per-sensor error still has to clear the floor of that band.
const SENSOR_QUALITY: [f64; 3] = [1.04, 0.98, 0.92];

const MIX_WEIGHT_BASE: f64 = 0.5;
const MIX_WEIGHT_SWING: f64 = 0.12;
const COMPONENT_GAP_BASE: f64 = 0.55;
const COMPONENT_GAP_SWING: f64 = 0.10;
const COMPONENT_STD_BASE: f64 = 1.0;
const COMPONENT_STD_SWING: f64 = 0.15;

/// Attacker shape distortion strengths: additive on the mixture weight,
/// relative on the component gap and component spread. Every cell picks its
/// own three-level pattern, so for each feature the three sensors disagree on
/// how the attacker's marginal is distorted. Once feature correlation ties
/// the sensors together, that cross-sensor disagreement is the part of the
/// attack that idiosyncratic noise cannot mask, and it is only visible to a
/// sink that receives more than a scalar per sensor.
const ATTACK_WEIGHT_DELTA: f64 = 0.08;
const ATTACK_GAP_DELTA: f64 = 0.22;
const ATTACK_STD_DELTA: f64 = 0.30;

const DRAWS_PER_SERIES: usize = 5000;
const REFERENCE_SEED_BASE: u64 = 0x7e5c_a1e5_0f2d_91b3;

/// Three-level pattern in {-1, 0, 1} used to vary shape across the grid.
fn tri(m: usize) -> f64 {
    (m % 3) as f64 - 1.0
}

/// Shape of one marginal in standardized units (mean 0 by construction).
struct MixtureShape {
    weight: f64,
    mean_a: f64,
    mean_b: f64,
    component_std: f64,
}

impl MixtureShape {
    fn assemble(weight: f64, half_gap: f64, component_std: f64) -> Self {
        Self {
            weight,
            mean_a: -2.0 * half_gap * (1.0 - weight),
            mean_b: 2.0 * half_gap * weight,
            component_std,
        }
    }

    fn for_cell(sensor: usize, feature: usize) -> Self {
        Self::assemble(
            MIX_WEIGHT_BASE + MIX_WEIGHT_SWING * tri(sensor + feature),
            COMPONENT_GAP_BASE + COMPONENT_GAP_SWING * tri(sensor + 2 * feature),
            COMPONENT_STD_BASE + COMPONENT_STD_SWING * tri(2 * sensor + feature),
        )
    }

    /// The attacker's version of this marginal: same family, distorted in
    /// weight, gap, and spread. All distortions scale with `separability`, so
    /// zero separability reproduces the legitimate shape exactly.
    fn attacked(&self, sensor: usize, feature: usize, separability: f64) -> Self {
        let weight =
            self.weight + separability * ATTACK_WEIGHT_DELTA * tri(sensor + 2 * feature + 1);
        let half_gap = 0.5
            * (self.mean_b - self.mean_a)
            * (1.0 + separability * ATTACK_GAP_DELTA * tri(2 * sensor + feature + 1));
        let component_std = self.component_std
            * (1.0 + separability * ATTACK_STD_DELTA * tri(sensor + feature));
        Self::assemble(weight, half_gap, component_std)
    }

    /// Standard deviation of the full mixture.
    fn std(&self) -> f64 {
        let gap = self.mean_b - self.mean_a;
        (self.component_std * self.component_std + self.weight * (1.0 - self.weight) * gap * gap)
            .sqrt()
    }
}

/// A named synthetic scenario with a tunable class separation knob.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScenario {
    id: String,
    separability: f64,
}

impl ReferenceScenario {
    /// Looks up a scenario by name; only `"default"` is defined.
    pub fn named(id: &str) -> Result<Self, DatagenError> {
        if id != "default" {
            return Err(DatagenError::UnknownScenario(id.to_string()));
        }
        Ok(Self {
            id: id.to_string(),
            separability: 1.0,
        })
    }

    /// Same marginal shapes with the attacker offset scaled by `separability`
    /// (0 makes both classes identical).
    pub fn with_separability(mut self, separability: f64) -> Result<Self, DatagenError> {
        if !separability.is_finite() || separability < 0.0 {
            return Err(DatagenError::InvalidSpec(
                "separability must be finite and >= 0".into(),
            ));
        }
        self.separability = separability;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn separability(&self) -> f64 {
        self.separability
    }

    /// Materializes the scenario as fitted marginals for a sensor grid.
    pub fn bank(&self, n_sensors: usize, n_features: usize) -> Result<MarginalBank, DatagenError> {
        if n_features > FEATURE_LOC_SCALE.len() {
            return Err(DatagenError::InvalidSpec(format!(
                "reference scenario defines {} features, {} requested",
                FEATURE_LOC_SCALE.len(),
                n_features
            )));
        }
        let mut series: Vec<[Vec<f64>; 2]> = Vec::with_capacity(n_sensors * n_features);
        for sensor in 0..n_sensors {
            for feature in 0..n_features {
                series.push(self.cell_series(sensor, feature));
            }
        }
        MarginalBank::from_fn(n_sensors, n_features, |n, k, class| {
            fit_kde(
                &series[n * n_features + k][class as usize],
                BandwidthRule::Silverman,
            )
        })
    }

    /// Draws the (attack, legitimate) sample series for one cell.
    ///
    /// Both class series share the same underlying `(u, z)` draws; the
    /// attacker value is a deterministic distortion of the legitimate one, so
    /// `separability = 0` collapses the two classes bit for bit.
    fn cell_series(&self, sensor: usize, feature: usize) -> [Vec<f64>; 2] {
        let (loc, scale) = FEATURE_LOC_SCALE[feature];
        let shape = MixtureShape::for_cell(sensor, feature);
        let attack_shape = shape.attacked(sensor, feature, self.separability);
        let quality = SENSOR_QUALITY[sensor % SENSOR_QUALITY.len()];
        let offset =
            FEATURE_DETECTABILITY[feature] * quality * shape.std() * self.separability;
        let seed = seeding::derive(
            REFERENCE_SEED_BASE,
            &[&self.id, &sensor.to_string(), &feature.to_string()],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut legit = Vec::with_capacity(DRAWS_PER_SERIES);
        let mut attack = Vec::with_capacity(DRAWS_PER_SERIES);
        for _ in 0..DRAWS_PER_SERIES {
            let u = rng.random::<f64>();
            let z: f64 = rng.sample(StandardNormal);
            let legit_mean = if u < shape.weight {
                shape.mean_a
            } else {
                shape.mean_b
            };
            legit.push(loc + scale * (legit_mean + shape.component_std * z));
            let attack_mean = if u < attack_shape.weight {
                attack_shape.mean_a
            } else {
                attack_shape.mean_b
            };
            attack.push(loc + scale * (attack_mean + attack_shape.component_std * z + offset));
        }
        [attack, legit]
    }
}

/// Fitted marginals for the named scenario at full separability.
pub fn reference_marginals(
    scenario_id: &str,
    n_sensors: usize,
    n_features: usize,
) -> Result<MarginalBank, DatagenError> {
    ReferenceScenario::named(scenario_id)?.bank(n_sensors, n_features)
}
