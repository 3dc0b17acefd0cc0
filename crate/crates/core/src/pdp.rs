//! Channel features from estimated power delay profiles.
//!
//! Each sensor reduces its power delay profile to four features: the number
//! of significant taps, their average power, the relative RMS delay spread,
//! and the peak smoothed received power. These form the per-sensor feature
//! vector that the compression networks consume.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdpError {
    #[error("invalid power delay profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate profile: every tap has zero power")]
    DegenerateProfile,

    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Estimated channel power delay profile.
///
/// Powers are linear (not dB). Profiles whose taps are all zero power are
/// accepted here but rejected by feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDelayProfile {
    /// `(delay seconds, linear power)`, delays strictly increasing.
    taps: Vec<(f64, f64)>,
    /// Instrument delay resolution in seconds.
    resolution: f64,
}

impl PowerDelayProfile {
    pub fn new(taps: Vec<(f64, f64)>, resolution: f64) -> Result<Self, PdpError> {
        if taps.is_empty() {
            return Err(PdpError::InvalidProfile("no taps".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(PdpError::InvalidProfile(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        for pair in taps.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(PdpError::InvalidProfile(format!(
                    "delays must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(delay, power) in &taps {
            if !delay.is_finite() || !power.is_finite() || power < 0.0 {
                return Err(PdpError::InvalidProfile(format!(
                    "bad tap (delay {delay}, power {power})"
                )));
            }
        }
        Ok(Self { taps, resolution })
    }

    pub fn taps(&self) -> &[(f64, f64)] {
        &self.taps
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Reads `(delay_s, power_linear)` rows from a headered CSV file.
    pub fn from_csv(path: &Path, resolution: f64) -> Result<Self, PdpError> {
        #[derive(Deserialize)]
        struct Row {
            delay_s: f64,
            power_linear: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut taps = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            taps.push((row.delay_s, row.power_linear));
        }
        Self::new(taps, resolution)
    }
}

/// Tunables for [`extract_features`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureExtractionConfig {
    /// Taps within this many dB of the strongest tap are counted.
    pub tap_threshold_db: f64,
    /// Moving-average window (in taps) for the smoothed received power.
    pub smoothing_window: usize,
}

impl Default for FeatureExtractionConfig {
    fn default() -> Self {
        Self {
            tap_threshold_db: 20.0,
            smoothing_window: 3,
        }
    }
}

impl FeatureExtractionConfig {
    fn validate(&self) -> Result<(), PdpError> {
        if !(self.tap_threshold_db > 0.0 && self.tap_threshold_db.is_finite()) {
            return Err(PdpError::InvalidConfig(format!(
                "tap_threshold_db must be positive, got {}",
                self.tap_threshold_db
            )));
        }
        if self.smoothing_window == 0 {
            return Err(PdpError::InvalidConfig(
                "smoothing_window must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// The four channel features, in network input order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub num_taps: usize,
    pub avg_tap_power: f64,
    /// Power-weighted RMS spread of counted-tap delays, seconds.
    pub rel_rms_delay: f64,
    /// Peak moving-average tap power.
    pub smoothed_rx_power: f64,
}

impl FeatureVector {
    /// Network input layout: `[num_taps, avg_tap_power, rel_rms_delay,
    /// smoothed_rx_power]`.
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.num_taps as f64,
            self.avg_tap_power,
            self.rel_rms_delay,
            self.smoothed_rx_power,
        ]
    }
}

/// Reduces a power delay profile to the four-feature vector.
///
/// Taps at or above `peak − tap_threshold_db` (dB) are counted. The relative
/// RMS delay uses counted taps only, weighting each delay by its share of
/// counted power and referencing delays to the first counted tap. The
/// smoothed received power is the maximum moving average over all taps; a
/// profile shorter than the window uses one window covering every tap.
pub fn extract_features(
    pdp: &PowerDelayProfile,
    cfg: &FeatureExtractionConfig,
) -> Result<FeatureVector, PdpError> {
    cfg.validate()?;
    let taps = pdp.taps();
    let peak = taps.iter().map(|&(_, p)| p).fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(PdpError::DegenerateProfile);
    }
    let cutoff = peak * 10f64.powf(-cfg.tap_threshold_db / 10.0);
    let counted: Vec<(f64, f64)> = taps
        .iter()
        .copied()
        .filter(|&(_, p)| p >= cutoff)
        .collect();
    let num_taps = counted.len();
    let total: f64 = counted.iter().map(|&(_, p)| p).sum();
    let avg_tap_power = total / num_taps as f64;

    let first_delay = counted[0].0;
    let mut mean = 0.0;
    let mut second = 0.0;
    for &(delay, power) in &counted {
        let w = power / total;
        let d = delay - first_delay;
        mean += w * d;
        second += w * d * d;
    }
    let rel_rms_delay = (second - mean * mean).max(0.0).sqrt();

    let window = cfg.smoothing_window.min(taps.len());
    let mut smoothed_rx_power = f64::NEG_INFINITY;
    for start in 0..=(taps.len() - window) {
        let sum: f64 = taps[start..start + window].iter().map(|&(_, p)| p).sum();
        smoothed_rx_power = smoothed_rx_power.max(sum / window as f64);
    }

    Ok(FeatureVector {
        num_taps,
        avg_tap_power,
        rel_rms_delay,
        smoothed_rx_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const US: f64 = 1e-6;

    fn profile(taps: Vec<(f64, f64)>) -> PowerDelayProfile {
        PowerDelayProfile::new(taps, 10.0 * US).unwrap()
    }

    #[test]
    fn point_channel_is_its_own_feature_vector() {
        let f = extract_features(&profile(vec![(0.0, 1.0)]), &Default::default()).unwrap();
        assert_eq!(f.num_taps, 1);
        assert_eq!(f.avg_tap_power, 1.0);
        assert_eq!(f.rel_rms_delay, 0.0);
        assert_eq!(f.smoothed_rx_power, 1.0);
    }

    #[test]
    fn two_equal_taps_spread_is_half_their_separation() {
        // Weighted moments by hand: E[tau] = 5 us, E[tau^2] = 50 us^2,
        // so the RMS spread is sqrt(50 - 25) = 5 us.
        let cfg = FeatureExtractionConfig {
            tap_threshold_db: 20.0,
            smoothing_window: 1,
        };
        let f = extract_features(&profile(vec![(0.0, 1.0), (10.0 * US, 1.0)]), &cfg).unwrap();
        assert_eq!(f.num_taps, 2);
        assert_eq!(f.avg_tap_power, 1.0);
        assert!((f.rel_rms_delay - 5.0 * US).abs() <= 1e-18);
        assert_eq!(f.smoothed_rx_power, 1.0);
    }

    #[test]
    fn tap_thirty_db_down_is_not_counted_at_twenty_db_threshold() {
        let f = extract_features(
            &profile(vec![(0.0, 1.0), (10.0 * US, 0.001)]),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(f.num_taps, 1);
        assert_eq!(f.avg_tap_power, 1.0);
    }

    #[test]
    fn tap_exactly_at_threshold_is_counted() {
        let f = extract_features(
            &profile(vec![(0.0, 1.0), (10.0 * US, 0.01)]),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(f.num_taps, 2);
    }

    #[test]
    fn smoothed_power_is_best_moving_average() {
        // Windows of 3: (1 + 0.5 + 0.2)/3 and (0.5 + 0.2 + 0.8)/3.
        let taps: Vec<(f64, f64)> = [1.0, 0.5, 0.2, 0.8]
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as f64 * US, p))
            .collect();
        let f = extract_features(&profile(taps), &Default::default()).unwrap();
        assert!((f.smoothed_rx_power - 1.7 / 3.0).abs() <= 1e-15);
    }

    #[test]
    fn all_zero_profile_is_degenerate() {
        let p = profile(vec![(0.0, 0.0), (10.0 * US, 0.0)]);
        assert!(matches!(
            extract_features(&p, &Default::default()),
            Err(PdpError::DegenerateProfile)
        ));
    }

    #[test]
    fn construction_rejects_bad_profiles() {
        assert!(PowerDelayProfile::new(vec![], 1.0).is_err());
        assert!(PowerDelayProfile::new(vec![(0.0, 1.0)], 0.0).is_err());
        assert!(PowerDelayProfile::new(vec![(1.0, 1.0), (1.0, 1.0)], 1.0).is_err());
        assert!(PowerDelayProfile::new(vec![(0.0, -1.0)], 1.0).is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        let p = profile(vec![(0.0, 1.0)]);
        let bad_db = FeatureExtractionConfig {
            tap_threshold_db: 0.0,
            smoothing_window: 1,
        };
        assert!(extract_features(&p, &bad_db).is_err());
        let bad_win = FeatureExtractionConfig {
            tap_threshold_db: 20.0,
            smoothing_window: 0,
        };
        assert!(extract_features(&p, &bad_win).is_err());
    }

    #[test]
    fn csv_ingest_reads_headered_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdp.csv");
        std::fs::write(&path, "delay_s,power_linear\n0.0,1.0\n1e-5,0.5\n").unwrap();
        let p = PowerDelayProfile::from_csv(&path, 10.0 * US).unwrap();
        assert_eq!(p.taps(), &[(0.0, 1.0), (1e-5, 0.5)]);
    }

    proptest! {
        #[test]
        fn power_scaling_scales_only_power_features(
            powers in proptest::collection::vec(0.01..10.0f64, 1..12),
            scale in 0.001..100.0f64,
        ) {
            let taps: Vec<(f64, f64)> = powers.iter().enumerate()
                .map(|(i, &p)| (i as f64 * US, p))
                .collect();
            let scaled: Vec<(f64, f64)> = taps.iter()
                .map(|&(d, p)| (d, p * scale))
                .collect();
            let a = extract_features(&profile(taps), &Default::default()).unwrap();
            let b = extract_features(&profile(scaled), &Default::default()).unwrap();
            prop_assert_eq!(a.num_taps, b.num_taps);
            prop_assert!((a.rel_rms_delay - b.rel_rms_delay).abs() <= 1e-12);
            prop_assert!((b.avg_tap_power - scale * a.avg_tap_power).abs()
                <= 1e-9 * b.avg_tap_power.abs().max(1.0));
            prop_assert!((b.smoothed_rx_power - scale * a.smoothed_rx_power).abs()
                <= 1e-9 * b.smoothed_rx_power.abs().max(1.0));
        }

        #[test]
        fn delay_shifts_change_nothing(
            powers in proptest::collection::vec(0.01..10.0f64, 1..12),
            shift in -1.0..1.0f64,
        ) {
            let taps: Vec<(f64, f64)> = powers.iter().enumerate()
                .map(|(i, &p)| (i as f64 * US, p))
                .collect();
            let shifted: Vec<(f64, f64)> = taps.iter()
                .map(|&(d, p)| (d + shift, p))
                .collect();
            let a = extract_features(&profile(taps), &Default::default()).unwrap();
            let b = extract_features(&profile(shifted), &Default::default()).unwrap();
            prop_assert_eq!(a.num_taps, b.num_taps);
            prop_assert_eq!(a.avg_tap_power, b.avg_tap_power);
            prop_assert!((a.rel_rms_delay - b.rel_rms_delay).abs() <= 1e-9 * US.max(a.rel_rms_delay));
            prop_assert_eq!(a.smoothed_rx_power, b.smoothed_rx_power);
        }
    }
}
