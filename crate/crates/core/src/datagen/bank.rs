//! Complete sets of per-(sensor, feature, class) marginal models.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::kde::{fit_kde, BandwidthRule, KdeModel};
use super::DatagenError;

/// One KDE marginal per (sensor, feature, class) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalBank {
    n_sensors: usize,
    n_features: usize,
    /// Indexed `(sensor * n_features + feature) * 2 + class`.
    models: Vec<KdeModel>,
}

impl MarginalBank {
    /// Builds a bank by calling `make(sensor, feature, class)` for every
    /// triple, sensors outermost, class innermost.
    pub fn from_fn(
        n_sensors: usize,
        n_features: usize,
        mut make: impl FnMut(usize, usize, u8) -> Result<KdeModel, DatagenError>,
    ) -> Result<Self, DatagenError> {
        if n_sensors == 0 || n_features == 0 {
            return Err(DatagenError::InvalidSpec(
                "sensor and feature counts must be >= 1".into(),
            ));
        }
        let mut models = Vec::with_capacity(n_sensors * n_features * 2);
        for n in 0..n_sensors {
            for k in 0..n_features {
                for class in 0..2u8 {
                    models.push(make(n, k, class)?);
                }
            }
        }
        Ok(Self {
            n_sensors,
            n_features,
            models,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Marginal for a sensor (0-based), feature (0-based), and class.
    pub fn model(&self, sensor: usize, feature: usize, class: u8) -> &KdeModel {
        assert!(sensor < self.n_sensors, "sensor {sensor} out of range");
        assert!(feature < self.n_features, "feature {feature} out of range");
        assert!(class < 2, "class {class} out of range");
        &self.models[(sensor * self.n_features + feature) * 2 + class as usize]
    }

    pub fn models(&self) -> impl Iterator<Item = (usize, usize, u8, &KdeModel)> {
        self.models.iter().enumerate().map(|(i, m)| {
            let class = (i % 2) as u8;
            let nk = i / 2;
            (nk / self.n_features, nk % self.n_features, class, m)
        })
    }

    /// Fits a bank from measured series in a CSV file with columns
    /// `sensor_id, feature_id, class, value`.
    ///
    /// Sensor and feature ids may start at 0 or 1 but must be contiguous;
    /// every (sensor, feature, class) triple needs at least two values.
    pub fn from_series_csv(path: &Path, rule: BandwidthRule) -> Result<Self, DatagenError> {
        #[derive(Deserialize)]
        struct Row {
            sensor_id: usize,
            feature_id: usize,
            class: u8,
            value: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut series: BTreeMap<(usize, usize, u8), Vec<f64>> = BTreeMap::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            if row.class > 1 {
                return Err(DatagenError::InvalidSpec(format!(
                    "class must be 0 or 1, got {}",
                    row.class
                )));
            }
            series
                .entry((row.sensor_id, row.feature_id, row.class))
                .or_default()
                .push(row.value);
        }
        if series.is_empty() {
            return Err(DatagenError::EmptyDataset);
        }
        let sensor_base = series.keys().map(|k| k.0).min().unwrap();
        let feature_base = series.keys().map(|k| k.1).min().unwrap();
        if sensor_base > 1 || feature_base > 1 {
            return Err(DatagenError::InvalidSpec(format!(
                "ids must start at 0 or 1 (saw sensor {sensor_base}, feature {feature_base})"
            )));
        }
        let n_sensors = series.keys().map(|k| k.0).max().unwrap() - sensor_base + 1;
        let n_features = series.keys().map(|k| k.1).max().unwrap() - feature_base + 1;
        Self::from_fn(n_sensors, n_features, |n, k, class| {
            let key = (n + sensor_base, k + feature_base, class);
            let values = series.get(&key).ok_or(DatagenError::MissingSeries {
                sensor: key.0,
                feature: key.1,
                class,
            })?;
            fit_kde(values, rule)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write_series_csv(rows: &[(usize, usize, u8, f64)]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let mut text = String::from("sensor_id,feature_id,class,value\n");
        for &(n, k, c, v) in rows {
            writeln!(text, "{n},{k},{c},{v}").unwrap();
        }
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    fn full_grid(n_sensors: usize, n_features: usize, base: usize) -> Vec<(usize, usize, u8, f64)> {
        let mut rows = Vec::new();
        for n in 0..n_sensors {
            for k in 0..n_features {
                for c in 0..2u8 {
                    // Three distinct values so every fit succeeds.
                    for (i, v) in [0.0, 1.0, 2.5].iter().enumerate() {
                        rows.push((n + base, k + base, c, v + i as f64 * 0.1 + n as f64));
                    }
                }
            }
        }
        rows
    }

    #[test]
    fn ingests_one_based_ids() {
        let (_dir, path) = write_series_csv(&full_grid(2, 3, 1));
        let bank = MarginalBank::from_series_csv(&path, BandwidthRule::Silverman).unwrap();
        assert_eq!(bank.n_sensors(), 2);
        assert_eq!(bank.n_features(), 3);
        assert_eq!(bank.model(1, 2, 0).count(), 3);
    }

    #[test]
    fn ingests_zero_based_ids() {
        let (_dir, path) = write_series_csv(&full_grid(2, 2, 0));
        let bank = MarginalBank::from_series_csv(&path, BandwidthRule::Silverman).unwrap();
        assert_eq!((bank.n_sensors(), bank.n_features()), (2, 2));
    }

    #[test]
    fn missing_triple_is_reported() {
        let mut rows = full_grid(2, 2, 0);
        rows.retain(|&(n, k, c, _)| !(n == 1 && k == 0 && c == 1));
        let (_dir, path) = write_series_csv(&rows);
        match MarginalBank::from_series_csv(&path, BandwidthRule::Silverman) {
            Err(DatagenError::MissingSeries {
                sensor: 1,
                feature: 0,
                class: 1,
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn bad_class_is_rejected() {
        let (_dir, path) = write_series_csv(&[(0, 0, 2, 1.0)]);
        assert!(MarginalBank::from_series_csv(&path, BandwidthRule::Silverman).is_err());
    }

    #[test]
    fn model_lookup_indexes_correctly() {
        let bank = MarginalBank::from_fn(2, 2, |n, k, class| {
            // Encode the triple in the centers to verify placement.
            let tag = (n * 100 + k * 10 + class as usize) as f64;
            super::super::kde::fit_kde(&[tag, tag + 1.0], BandwidthRule::Fixed(0.5))
        })
        .unwrap();
        assert_eq!(bank.model(1, 0, 1).centers()[0], 101.0);
        assert_eq!(bank.model(0, 1, 0).centers()[0], 10.0);
    }
}
