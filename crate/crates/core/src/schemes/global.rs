//! End-to-end training of per-sensor subnetworks plus sink as one network.
//!
//! Architectures are written as `a1-a2-...-aQ||b1-...-bQ`: layer widths of
//! one local subnetwork before the `||`, sink widths after it. Empty tokens
//! are ignored, so `4-3-||-6-3-3-1` reads as local `(4,3)` and sink
//! `(6,3,3,1)`. The last local width is the per-sensor code width M; the
//! sink always consumes all `M*N` code entries and must end in one neuron.

use crate::nn::{
    fit, ActivationKind, LayerSpec, MlpNetwork, TrainBranch, TrainConfig, TrainGraph, TrainReport,
    TrainSet,
};
use crate::seeding;

use super::arch::SENSOR_FEATURES;
use super::SchemeError;

/// Total neurons of the standard three-sensor layouts; configuration
/// validation rejects notation edits that break this accounting.
pub const STANDARD_NEURON_BUDGET: usize = 34;

/// Parsed sensor/sink architecture split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalConfig {
    notation: String,
    local_widths: Vec<usize>,
    sink_widths: Vec<usize>,
    n_sensors: usize,
}

impl GlobalConfig {
    pub fn notation(&self) -> &str {
        &self.notation
    }

    pub fn local_widths(&self) -> &[usize] {
        &self.local_widths
    }

    pub fn sink_widths(&self) -> &[usize] {
        &self.sink_widths
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    /// Per-sensor code width (last local layer).
    pub fn m(&self) -> usize {
        *self.local_widths.last().unwrap()
    }

    /// Neurons across all sensors plus the sink.
    pub fn total_neurons(&self) -> usize {
        self.n_sensors * self.local_widths.iter().sum::<usize>()
            + self.sink_widths.iter().sum::<usize>()
    }
}

fn parse_widths(side: &str, what: &str) -> Result<Vec<usize>, SchemeError> {
    let mut widths = Vec::new();
    for token in side.split('-') {
        if token.is_empty() {
            continue;
        }
        let w: usize = token.parse().map_err(|_| {
            SchemeError::Config(format!("{what} width {token:?} is not a positive integer"))
        })?;
        if w == 0 {
            return Err(SchemeError::Config(format!("{what} width must be >= 1")));
        }
        widths.push(w);
    }
    if widths.is_empty() {
        return Err(SchemeError::Config(format!(
            "{what} side of the notation has no layers"
        )));
    }
    Ok(widths)
}

/// Parses an architecture notation for `n_sensors` sensors.
pub fn parse_global_config(notation: &str, n_sensors: usize) -> Result<GlobalConfig, SchemeError> {
    if n_sensors == 0 {
        return Err(SchemeError::Config("need at least one sensor".into()));
    }
    let trimmed = notation.trim();
    let parts: Vec<&str> = trimmed.split("||").collect();
    if parts.len() != 2 {
        return Err(SchemeError::Config(format!(
            "notation must contain exactly one \"||\" separator, got {notation:?}"
        )));
    }
    let local_widths = parse_widths(parts[0], "local")?;
    let sink_widths = parse_widths(parts[1], "sink")?;
    if *sink_widths.last().unwrap() != 1 {
        return Err(SchemeError::Config(
            "sink must end in a single decision neuron".into(),
        ));
    }
    Ok(GlobalConfig {
        notation: trimmed.to_string(),
        local_widths,
        sink_widths,
        n_sensors,
    })
}

/// Globally trained sensor subnetworks and sink.
#[derive(Debug, Clone)]
pub struct GlobalTrained {
    /// One weight-independent subnetwork per sensor, in sensor order.
    pub locals: Vec<MlpNetwork>,
    pub sink: MlpNetwork,
    pub report: TrainReport,
}

fn local_specs(widths: &[usize]) -> Vec<LayerSpec> {
    widths
        .iter()
        .map(|&w| LayerSpec::new(w, ActivationKind::Relu))
        .collect()
}

fn sink_specs(widths: &[usize]) -> Vec<LayerSpec> {
    let last = widths.len() - 1;
    widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let act = if i == last {
                ActivationKind::Sigmoid
            } else {
                ActivationKind::Relu
            };
            LayerSpec::new(w, act)
        })
        .collect()
}

/// Trains the composite network end-to-end on labeled sensor-major rows.
pub fn train_global(
    gc: &GlobalConfig,
    train_set: &TrainSet,
    val_set: &TrainSet,
    cfg: &TrainConfig,
) -> Result<GlobalTrained, SchemeError> {
    let expected = gc.n_sensors * SENSOR_FEATURES;
    for (set, what) in [(train_set, "train"), (val_set, "validation")] {
        if set.input_dim() != expected {
            return Err(SchemeError::Config(format!(
                "{what} rows must hold {} sensors x {} features = {expected} values, got {}",
                gc.n_sensors,
                SENSOR_FEATURES,
                set.input_dim()
            )));
        }
        if set.target_dim() != 1 {
            return Err(SchemeError::Config(format!(
                "{what} targets must be scalar labels, got width {}",
                set.target_dim()
            )));
        }
    }
    let mut branches = Vec::with_capacity(gc.n_sensors);
    for sensor in 0..gc.n_sensors {
        let seed = seeding::derive(cfg.seed, &["init", "local", &sensor.to_string()]);
        let net = MlpNetwork::init(SENSOR_FEATURES, &local_specs(&gc.local_widths), seed)?;
        branches.push(TrainBranch::new(net, sensor * SENSOR_FEATURES, true));
    }
    let sink = MlpNetwork::init(
        gc.m() * gc.n_sensors,
        &sink_specs(&gc.sink_widths),
        seeding::derive(cfg.seed, &["init", "sink"]),
    )?;
    let mut graph = TrainGraph::branch_trunk(branches, sink)?;
    let report = fit(&mut graph, train_set, val_set, cfg)?;
    let (branches, trunk) = graph.into_parts();
    Ok(GlobalTrained {
        locals: branches.into_iter().map(|b| b.net).collect(),
        sink: trunk.unwrap(),
        report,
    })
}
