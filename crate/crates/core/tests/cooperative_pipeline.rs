//! End-to-end pipeline checks on the bundled reference scenario.
//!
//! Both tests share one synthetic dataset and one set of trained per-sensor
//! models: the soft-decision error of each sensor alone must land in the band
//! the scenario was tuned for, and fusing the sensors' compressed reports at
//! the sink must beat the best single sensor.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uwan_auth::datagen::{
    split_dataset, DatasetGenerator, FeatureDataset, ReferenceScenario, SplitSpec,
};
use uwan_auth::eval::{compute_rates, optimize_threshold, ScoreSet};
use uwan_auth::nn::{MlpNetwork, Optimizer, TrainConfig};
use uwan_auth::schemes::{
    sensor_labeled, train_cldae_local, train_fusion, AuthenticatorBundle, BundleMeta, CldaeLocal,
    FeatureScaler, LocalEncoder, Stage2Mode,
};
use uwan_auth::seeding;

const N_SENSORS: usize = 3;
const N_FEATURES: usize = 4;
const PER_CLASS: usize = 20_000;
const ALPHA: f64 = 0.9;
const CODE_WIDTH: usize = 3;
const BASE_SEED: u64 = 41;

struct Fixture {
    scaler: FeatureScaler,
    /// Raw-unit splits, scored through the bundle (which standardizes
    /// internally).
    val: FeatureDataset,
    test: FeatureDataset,
    /// Standardized splits used for training and for per-sensor scoring.
    std_train: FeatureDataset,
    std_val: FeatureDataset,
    std_test: FeatureDataset,
    /// One combined score+reconstruction model per sensor; the score half is
    /// bitwise the standalone soft-decision model for the same seed.
    locals: Vec<CldaeLocal>,
}

fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 3e-3,
        epochs: 160,
        batch_size: 256,
        optimizer: Optimizer::Adam,
        seed,
        early_stop_patience: 30,
    }
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let scenario = ReferenceScenario::named("default").expect("bundled scenario");
        let bank = scenario.bank(N_SENSORS, N_FEATURES).expect("scenario bank");
        let generator = DatasetGenerator::new(&bank);
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(BASE_SEED, &["data"]));
        let dataset = generator
            .generate(ALPHA, PER_CLASS, &mut rng)
            .expect("dataset");
        let mut split_rng = ChaCha8Rng::seed_from_u64(seeding::derive(BASE_SEED, &["split"]));
        let (train, val, test) =
            split_dataset(&dataset, SplitSpec::default(), &mut split_rng).expect("split");
        let scaler = FeatureScaler::fit(&train).expect("scaler fit");
        let std_train = scaler.standardize_dataset(&train).expect("train scaling");
        let std_val = scaler.standardize_dataset(&val).expect("val scaling");
        let std_test = scaler.standardize_dataset(&test).expect("test scaling");
        let locals = (0..N_SENSORS)
            .map(|sensor| {
                let train_set = sensor_labeled(&std_train, sensor).expect("train block");
                let val_set = sensor_labeled(&std_val, sensor).expect("val block");
                let cfg = train_config(seeding::derive(BASE_SEED, &["local", &sensor.to_string()]));
                train_cldae_local(
                    &train_set,
                    &val_set,
                    CODE_WIDTH,
                    scaler.sensor_scales(sensor, N_FEATURES),
                    &cfg,
                    Stage2Mode::FreezeScore,
                )
                .expect("local training")
            })
            .collect();
        Fixture {
            scaler,
            val,
            test,
            std_train,
            std_val,
            std_test,
            locals,
        }
    })
}

/// Scores one sensor's feature block through a scalar network.
fn sensor_scores(net: &MlpNetwork, ds: &FeatureDataset, sensor: usize) -> ScoreSet {
    let k = ds.n_features();
    let col = ds.column(sensor, 0);
    let entries = (0..ds.len())
        .map(|i| {
            let block = &ds.row(i)[col..col + k];
            (net.forward(block).expect("forward")[0], ds.label(i))
        })
        .collect();
    ScoreSet::new(entries).expect("score set")
}

/// Threshold on validation scores, error on test scores.
fn validated_test_error(val: &ScoreSet, test: &ScoreSet) -> f64 {
    let (lambda, _) = optimize_threshold(val).expect("threshold");
    let (_, _, eps) = compute_rates(test, lambda).expect("rates");
    eps
}

fn single_sensor_errors(fx: &Fixture) -> Vec<f64> {
    (0..N_SENSORS)
        .map(|sensor| {
            let net = &fx.locals[sensor].score;
            let val = sensor_scores(net, &fx.std_val, sensor);
            let test = sensor_scores(net, &fx.std_test, sensor);
            validated_test_error(&val, &test)
        })
        .collect()
}

#[test]
fn single_sensor_soft_decision_error_sits_in_design_band() {
    let errors = single_sensor_errors(fixture());
    for (sensor, &eps) in errors.iter().enumerate() {
        assert!(
            (0.05..=0.3).contains(&eps),
            "sensor {sensor} error {eps} outside [0.05, 0.3]; all sensors: {errors:?}"
        );
    }
}

#[test]
fn sink_fusion_beats_every_single_sensor() {
    let fx = fixture();
    let local_errors = single_sensor_errors(fx);
    let best_local = local_errors.iter().cloned().fold(f64::INFINITY, f64::min);

    let encoders: Vec<LocalEncoder> = fx
        .locals
        .iter()
        .map(|local| LocalEncoder::Cldae {
            score: local.score.clone(),
            residual: local.residual.clone(),
        })
        .collect();
    let fusion_cfg = train_config(seeding::derive(BASE_SEED, &["fusion"]));
    let (fusion, _) =
        train_fusion(&encoders, &fx.std_train, &fx.std_val, &fusion_cfg).expect("fusion training");
    let meta = BundleMeta {
        scheme: "CLDAE".into(),
        m: CODE_WIDTH,
        alpha: ALPHA,
        seed: BASE_SEED,
        notation: None,
    };
    let bundle =
        AuthenticatorBundle::new(meta, fx.scaler.clone(), encoders, fusion).expect("bundle");

    let val_scores = bundle.score_dataset(&fx.val).expect("val scores");
    let test_scores = bundle.score_dataset(&fx.test).expect("test scores");
    let fused = validated_test_error(&val_scores, &test_scores);
    assert!(
        fused < best_local,
        "fused error {fused} not below best single sensor {best_local} (locals {local_errors:?})"
    );
}
