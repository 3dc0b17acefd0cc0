//! Adapters from labeled feature datasets to trainable sample sets.

use crate::datagen::FeatureDataset;
use crate::nn::TrainSet;

use super::SchemeError;

/// One sensor's feature block with reconstruction targets (targets = inputs).
pub fn sensor_features(ds: &FeatureDataset, sensor: usize) -> Result<TrainSet, SchemeError> {
    let k = ds.n_features();
    let col = ds.column(sensor, 0);
    let mut inputs = Vec::with_capacity(ds.len() * k);
    for i in 0..ds.len() {
        inputs.extend_from_slice(&ds.row(i)[col..col + k]);
    }
    Ok(TrainSet::reconstruction(inputs, k)?)
}

/// One sensor's feature block with elementwise rescaled reconstruction
/// targets (`target[k] = input[k] * target_scale[k]`).
///
/// Used when the networks consume standardized features but the
/// reconstruction loss stays in raw units: passing the per-feature standard
/// deviations as `target_scale` turns standardized inputs back into centered
/// physical values, so features with a wide physical spread dominate the loss
/// exactly as they would without standardization.
pub fn sensor_features_scaled(
    ds: &FeatureDataset,
    sensor: usize,
    target_scale: &[f64],
) -> Result<TrainSet, SchemeError> {
    let k = ds.n_features();
    if target_scale.len() != k {
        return Err(SchemeError::Config(format!(
            "target_scale has {} entries, sensor block has {k}",
            target_scale.len()
        )));
    }
    let col = ds.column(sensor, 0);
    let mut inputs = Vec::with_capacity(ds.len() * k);
    let mut targets = Vec::with_capacity(ds.len() * k);
    for i in 0..ds.len() {
        let block = &ds.row(i)[col..col + k];
        inputs.extend_from_slice(block);
        targets.extend(block.iter().zip(target_scale).map(|(&v, &s)| v * s));
    }
    Ok(TrainSet::new(inputs, targets, k, k)?)
}

/// One sensor's feature block with the authenticity label as scalar target.
pub fn sensor_labeled(ds: &FeatureDataset, sensor: usize) -> Result<TrainSet, SchemeError> {
    let k = ds.n_features();
    let col = ds.column(sensor, 0);
    let mut inputs = Vec::with_capacity(ds.len() * k);
    let mut targets = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        inputs.extend_from_slice(&ds.row(i)[col..col + k]);
        targets.push(ds.label(i) as f64);
    }
    Ok(TrainSet::new(inputs, targets, k, 1)?)
}

/// Full sensor-major rows with the authenticity label as scalar target.
pub fn rows_labeled(ds: &FeatureDataset) -> Result<TrainSet, SchemeError> {
    let width = ds.n_sensors() * ds.n_features();
    let mut inputs = Vec::with_capacity(ds.len() * width);
    let mut targets = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        inputs.extend_from_slice(ds.row(i));
        targets.push(ds.label(i) as f64);
    }
    Ok(TrainSet::new(inputs, targets, width, 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> FeatureDataset {
        // 2 sensors x 2 features; row i = [10i, 10i+1, 10i+2, 10i+3].
        let features: Vec<f64> = (0..3)
            .flat_map(|i| (0..4).map(move |j| (10 * i + j) as f64))
            .collect();
        FeatureDataset::from_parts(2, 2, 0.0, "t".into(), features, vec![1, 0, 1]).unwrap()
    }

    #[test]
    fn sensor_blocks_are_extracted_in_row_order() {
        let ds = tiny_dataset();
        let s1 = sensor_labeled(&ds, 1).unwrap();
        assert_eq!(s1.input_dim(), 2);
        assert_eq!(s1.input_row(0), &[2.0, 3.0]);
        assert_eq!(s1.input_row(2), &[22.0, 23.0]);
        assert_eq!(s1.target_row(1), &[0.0]);
    }

    #[test]
    fn reconstruction_targets_equal_inputs() {
        let ds = tiny_dataset();
        let s0 = sensor_features(&ds, 0).unwrap();
        assert_eq!(s0.input_row(1), s0.target_row(1));
        assert_eq!(s0.input_row(1), &[10.0, 11.0]);
    }

    #[test]
    fn scaled_reconstruction_targets_are_rescaled_inputs() {
        let ds = tiny_dataset();
        let s1 = sensor_features_scaled(&ds, 1, &[10.0, 0.5]).unwrap();
        assert_eq!(s1.input_row(2), &[22.0, 23.0]);
        assert_eq!(s1.target_row(2), &[220.0, 11.5]);
        assert!(sensor_features_scaled(&ds, 1, &[1.0]).is_err());
    }

    #[test]
    fn full_rows_keep_sensor_major_order() {
        let ds = tiny_dataset();
        let all = rows_labeled(&ds).unwrap();
        assert_eq!(all.input_dim(), 4);
        assert_eq!(all.input_row(2), &[20.0, 21.0, 22.0, 23.0]);
        assert_eq!(all.target_row(2), &[1.0]);
    }
}
