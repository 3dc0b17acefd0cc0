//! Experiment configuration: file format, defaults, validation.
//!
//! The config is one declarative TOML file. Every key has a default, so the
//! empty file is a complete experiment (the full sweep on the bundled
//! scenario). Validation never stops at the first problem: it returns the
//! resolved config together with every violation found, and the caller
//! decides whether errors block the run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use uwan_auth::datagen::{DatagenError, ReferenceScenario, SplitSpec};
use uwan_auth::nn::{Optimizer, TrainConfig};
use uwan_auth::schemes::{parse_global_config, SENSOR_FEATURES, STANDARD_NEURON_BUDGET};

/// The four sink-depth tradeoffs of the globally trained scheme at three
/// sensors, from the shallowest sink (per-sensor code width 1) to the
/// deepest (width 4). All account to the shared 34-neuron budget.
pub const STANDARD_NOTATIONS: [&str; 4] = [
    "4-3-2-1||-3-1",
    "4-3-2-||-3-3-1",
    "4-3-||-6-3-3-1",
    "4-||-9-6-3-3-1",
];

/// Widest per-sensor code the local encoder stacks are defined for.
pub const MAX_LOCAL_CODE_WIDTH: usize = 3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// TOML syntax or structure problem; the message carries line and column.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Training scheme selector as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Unsupervised per-sensor compression, supervised sink.
    Ae,
    /// Scalar per-sensor soft decision, supervised sink.
    Ld,
    /// Soft-decision score plus reconstruction residual per sensor.
    Cldae,
    /// Sensor subnetworks and sink trained end to end.
    Global,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Ae,
        SchemeKind::Ld,
        SchemeKind::Cldae,
        SchemeKind::Global,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ae => "AE",
            SchemeKind::Ld => "LD",
            SchemeKind::Cldae => "CLDAE",
            SchemeKind::Global => "GLOBAL",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AE" => Some(SchemeKind::Ae),
            "LD" => Some(SchemeKind::Ld),
            "CLDAE" => Some(SchemeKind::Cldae),
            "GLOBAL" => Some(SchemeKind::Global),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optimization settings shared by every training in the run; the per-cell
/// seed is filled in by the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Consecutive non-improving validation epochs before stopping; 0 runs
    /// every epoch.
    pub early_stop_patience: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            epochs: 120,
            batch_size: 512,
            optimizer: Optimizer::Adam,
            early_stop_patience: 12,
        }
    }
}

impl TrainSettings {
    pub fn config_with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            seed,
            early_stop_patience: self.early_stop_patience,
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Bundled scenario name; only `"default"` exists.
    pub scenario: String,
    pub n_sensors: usize,
    pub n_features: usize,
    /// Cross-sensor coupling strengths to sweep.
    pub alphas: Vec<f64>,
    /// Per-sensor code widths to sweep for the local schemes.
    pub ms: Vec<usize>,
    pub schemes: Vec<SchemeKind>,
    /// Architecture notations run when `GLOBAL` is selected.
    pub global_notations: Vec<String>,
    pub samples_per_class: usize,
    pub seeds: Vec<u64>,
    pub split: SplitSpec,
    pub train: TrainSettings,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            n_sensors: 3,
            n_features: SENSOR_FEATURES,
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            ms: vec![1, 2, 3],
            schemes: SchemeKind::ALL.to_vec(),
            global_notations: STANDARD_NOTATIONS.iter().map(|s| s.to_string()).collect(),
            samples_per_class: 100_000,
            seeds: vec![0, 1, 2, 3, 4],
            split: SplitSpec::default(),
            train: TrainSettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

/// One validation finding, anchored to the config key it concerns.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        }
    }

    fn warning(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.field, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// On-disk shape of the config; every key optional, unknown keys rejected
/// by serde with the offending line in the message.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    n_sensors: Option<usize>,
    n_features: Option<usize>,
    alphas: Option<Vec<f64>>,
    ms: Option<Vec<usize>>,
    schemes: Option<Vec<String>>,
    global_notations: Option<Vec<String>>,
    samples_per_class: Option<usize>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
    split: Option<RawSplit>,
    train: Option<RawTrain>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    train: Option<f64>,
    validation: Option<f64>,
    test: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    optimizer: Option<String>,
    early_stop_patience: Option<usize>,
}

/// Reads, resolves and validates a config file. Returns the resolved config
/// plus all findings; the config is only safe to run when no finding has
/// [`Severity::Error`].
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, Vec<Diagnostic>), ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(resolve(raw))
}

fn resolve(raw: RawConfig) -> (ExperimentConfig, Vec<Diagnostic>) {
    let defaults = ExperimentConfig::default();
    let mut diags = Vec::new();

    // The degeneracy warning only concerns combinations the file spells
    // out; the built-in default sweep is quiet.
    let explicit_degeneracy = raw.ms.is_some() || raw.schemes.is_some();

    let scenario = raw.scenario.unwrap_or(defaults.scenario);
    let n_sensors = raw.n_sensors.unwrap_or(defaults.n_sensors);
    let n_features = raw.n_features.unwrap_or(defaults.n_features);
    let alphas = raw.alphas.unwrap_or(defaults.alphas);
    let ms = raw.ms.unwrap_or(defaults.ms);
    let samples_per_class = raw.samples_per_class.unwrap_or(defaults.samples_per_class);
    let seeds = raw.seeds.unwrap_or(defaults.seeds);
    let output_dir = raw.output_dir.unwrap_or(defaults.output_dir);

    let schemes = match raw.schemes {
        None => defaults.schemes,
        Some(names) => {
            let mut kinds = Vec::new();
            for name in &names {
                match SchemeKind::from_name(name) {
                    Some(kind) if kinds.contains(&kind) => {
                        diags.push(Diagnostic::warning("schemes", format!("{name} repeated")));
                    }
                    Some(kind) => kinds.push(kind),
                    None => diags.push(Diagnostic::error(
                        "schemes",
                        format!("unknown scheme {name:?}; expected AE, LD, CLDAE or GLOBAL"),
                    )),
                }
            }
            kinds
        }
    };
    let global_notations = raw.global_notations.unwrap_or(defaults.global_notations);

    let split = resolve_split(raw.split, &mut diags);
    let train = resolve_train(raw.train, &mut diags);

    let config = ExperimentConfig {
        scenario,
        n_sensors,
        n_features,
        alphas,
        ms,
        schemes,
        global_notations,
        samples_per_class,
        seeds,
        split,
        train,
        output_dir,
    };
    validate(&config, explicit_degeneracy, &mut diags);
    (config, diags)
}

fn resolve_split(raw: Option<RawSplit>, diags: &mut Vec<Diagnostic>) -> SplitSpec {
    let raw = raw.unwrap_or_default();
    let d = SplitSpec::default();
    let spec = SplitSpec {
        train_frac: raw.train.unwrap_or(d.train_frac),
        val_frac: raw.validation.unwrap_or(d.val_frac),
        test_frac: raw.test.unwrap_or(d.test_frac),
    };
    match SplitSpec::new(spec.train_frac, spec.val_frac, spec.test_frac) {
        Ok(spec) => spec,
        Err(e) => {
            diags.push(Diagnostic::error("split", e.to_string()));
            d
        }
    }
}

fn resolve_train(raw: Option<RawTrain>, diags: &mut Vec<Diagnostic>) -> TrainSettings {
    let raw = raw.unwrap_or_default();
    let mut settings = TrainSettings::default();
    if let Some(lr) = raw.learning_rate {
        if lr.is_finite() && lr > 0.0 {
            settings.learning_rate = lr;
        } else {
            diags.push(Diagnostic::error(
                "train.learning_rate",
                format!("must be a positive finite number, got {lr}"),
            ));
        }
    }
    if let Some(epochs) = raw.epochs {
        if epochs > 0 {
            settings.epochs = epochs;
        } else {
            diags.push(Diagnostic::error("train.epochs", "must be at least 1"));
        }
    }
    if let Some(batch) = raw.batch_size {
        if batch > 0 {
            settings.batch_size = batch;
        } else {
            diags.push(Diagnostic::error("train.batch_size", "must be at least 1"));
        }
    }
    if let Some(name) = raw.optimizer {
        match name.to_ascii_lowercase().as_str() {
            "sgd" => settings.optimizer = Optimizer::Sgd,
            "adam" => settings.optimizer = Optimizer::Adam,
            other => diags.push(Diagnostic::error(
                "train.optimizer",
                format!("unknown optimizer {other:?}; expected \"sgd\" or \"adam\""),
            )),
        }
    }
    if let Some(patience) = raw.early_stop_patience {
        settings.early_stop_patience = patience;
    }
    settings
}

/// Structural and range validation of a resolved config; appends one
/// diagnostic per violation.
fn validate(config: &ExperimentConfig, explicit_degeneracy: bool, diags: &mut Vec<Diagnostic>) {
    if let Err(e @ DatagenError::UnknownScenario(_)) = ReferenceScenario::named(&config.scenario) {
        diags.push(Diagnostic::error("scenario", e.to_string()));
    }
    if config.n_sensors == 0 {
        diags.push(Diagnostic::error("n_sensors", "must be at least 1"));
    }
    if config.n_features != SENSOR_FEATURES {
        diags.push(Diagnostic::error(
            "n_features",
            format!(
                "the feature pipeline and encoder stacks are fixed at {SENSOR_FEATURES} \
                 features per sensor, got {}",
                config.n_features
            ),
        ));
    }

    if config.alphas.is_empty() {
        diags.push(Diagnostic::error("alphas", "at least one value required"));
    }
    for (i, &alpha) in config.alphas.iter().enumerate() {
        if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
            diags.push(Diagnostic::error(
                &format!("alphas[{i}]"),
                format!("coupling strength must lie in [0, 1], got {alpha}"),
            ));
        }
    }
    if has_duplicates(&config.alphas) {
        diags.push(Diagnostic::warning("alphas", "contains repeated values"));
    }

    let wants_local_codes = config
        .schemes
        .iter()
        .any(|s| matches!(s, SchemeKind::Ae | SchemeKind::Cldae));
    if wants_local_codes && config.ms.is_empty() {
        diags.push(Diagnostic::error(
            "ms",
            "AE/CLDAE sweeps need at least one code width",
        ));
    }
    for (i, &m) in config.ms.iter().enumerate() {
        if m == 0 || m > MAX_LOCAL_CODE_WIDTH {
            diags.push(Diagnostic::error(
                &format!("ms[{i}]"),
                format!("local code width must lie in 1..={MAX_LOCAL_CODE_WIDTH}, got {m}"),
            ));
        }
    }
    if explicit_degeneracy && config.schemes.contains(&SchemeKind::Cldae) && config.ms.contains(&1)
    {
        diags.push(Diagnostic::warning(
            "ms",
            "CLDAE with M = 1 degenerates to LD; the cell is reported under the LD scheme",
        ));
    }

    if config.schemes.is_empty() {
        diags.push(Diagnostic::error("schemes", "at least one scheme required"));
    }

    if config.schemes.contains(&SchemeKind::Global) {
        if config.global_notations.is_empty() {
            diags.push(Diagnostic::error(
                "global_notations",
                "GLOBAL sweeps need at least one architecture notation",
            ));
        }
        for (i, notation) in config.global_notations.iter().enumerate() {
            match parse_global_config(notation, config.n_sensors.max(1)) {
                Ok(gc) => {
                    if config.n_sensors == 3 && gc.total_neurons() != STANDARD_NEURON_BUDGET {
                        diags.push(Diagnostic::error(
                            &format!("global_notations[{i}]"),
                            format!(
                                "{notation:?} accounts to {} neurons; the shared budget at 3 \
                                 sensors is {STANDARD_NEURON_BUDGET}",
                                gc.total_neurons()
                            ),
                        ));
                    }
                }
                Err(e) => diags.push(Diagnostic::error(
                    &format!("global_notations[{i}]"),
                    e.to_string(),
                )),
            }
        }
        if config.n_sensors != 3 && config.n_sensors != 0 {
            diags.push(Diagnostic::warning(
                "global_notations",
                "the 34-neuron budget check is defined at 3 sensors and is skipped here",
            ));
        }
    } else if !config.global_notations.is_empty()
        && config.global_notations.as_slice()
            != STANDARD_NOTATIONS
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .as_slice()
    {
        diags.push(Diagnostic::warning(
            "global_notations",
            "set but GLOBAL is not among the schemes; ignored",
        ));
    }

    if config.samples_per_class < 10 {
        diags.push(Diagnostic::error(
            "samples_per_class",
            "need at least 10 rows per class to split into train/validation/test",
        ));
    } else if config.samples_per_class < 1000 {
        diags.push(Diagnostic::warning(
            "samples_per_class",
            "fewer than 1000 rows per class makes the error rates very coarse",
        ));
    }

    if config.seeds.is_empty() {
        diags.push(Diagnostic::error("seeds", "at least one seed required"));
    }
    if has_duplicates(&config.seeds) {
        diags.push(Diagnostic::warning(
            "seeds",
            "contains repeated values; duplicate cells produce identical rows",
        ));
    }
}

fn has_duplicates<T: PartialEq>(values: &[T]) -> bool {
    values
        .iter()
        .enumerate()
        .any(|(i, v)| values[..i].contains(v))
}
