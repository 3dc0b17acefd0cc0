//! Per-sensor (local) training of the three compressor schemes.
//!
//! Every routine derives its weight-initialization seed from `cfg.seed`, so
//! one seed value fully determines a training run (initialization and batch
//! shuffling alike).

use crate::nn::{fit, train, MlpNetwork, TrainBranch, TrainConfig, TrainGraph, TrainReport, TrainSet};
use crate::seeding;

use super::arch::{
    autoencoder_stack, decoder_network, ld_network, residual_network, split_autoencoder,
    SENSOR_FEATURES,
};
use super::SchemeError;

fn init_seed(cfg: &TrainConfig, tags: &[&str]) -> u64 {
    let mut all = vec!["init"];
    all.extend_from_slice(tags);
    seeding::derive(cfg.seed, &all)
}

fn check_single_sensor(set: &TrainSet, target_dim: usize, what: &str) -> Result<(), SchemeError> {
    if set.input_dim() != SENSOR_FEATURES {
        return Err(SchemeError::Config(format!(
            "{what} rows must be single-sensor feature vectors of width {SENSOR_FEATURES}, got {}",
            set.input_dim()
        )));
    }
    if set.target_dim() != target_dim {
        return Err(SchemeError::Config(format!(
            "{what} targets must have width {target_dim}, got {}",
            set.target_dim()
        )));
    }
    Ok(())
}

/// Jointly trained encoder/decoder pair of the autoencoder scheme.
#[derive(Debug, Clone)]
pub struct AeLocal {
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
    pub report: TrainReport,
}

/// Trains one sensor's autoencoder on reconstruction error.
///
/// `train`/`val` must be reconstruction sets: targets are the inputs, or the
/// inputs rescaled elementwise (see [`super::sensor_features_scaled`]) when the
/// inputs are standardized and the loss should stay in raw units. Labels
/// play no role.
pub fn train_ae_local(
    train_set: &TrainSet,
    val_set: &TrainSet,
    m: usize,
    cfg: &TrainConfig,
) -> Result<AeLocal, SchemeError> {
    check_single_sensor(train_set, SENSOR_FEATURES, "autoencoder train")?;
    check_single_sensor(val_set, SENSOR_FEATURES, "autoencoder validation")?;
    let stack = autoencoder_stack(m, init_seed(cfg, &["ae", &m.to_string()]))?;
    let (stack, report) = train(stack, train_set, val_set, cfg)?;
    let (encoder, decoder) = split_autoencoder(&stack)?;
    Ok(AeLocal {
        encoder,
        decoder,
        report,
    })
}

/// Trained scalar soft-decision network of one sensor.
#[derive(Debug, Clone)]
pub struct LdLocal {
    pub net: MlpNetwork,
    pub report: TrainReport,
}

/// Trains one sensor's soft-decision network against labels.
pub fn train_ld_local(
    train_set: &TrainSet,
    val_set: &TrainSet,
    cfg: &TrainConfig,
) -> Result<LdLocal, SchemeError> {
    check_single_sensor(train_set, 1, "soft-decision train")?;
    check_single_sensor(val_set, 1, "soft-decision validation")?;
    let net = ld_network(init_seed(cfg, &["ld"]))?;
    let (net, report) = train(net, train_set, val_set, cfg)?;
    Ok(LdLocal { net, report })
}

/// Whether the second training stage of the combined scheme may update the
/// score network. The default keeps it frozen so the first code entry
/// retains its soft-decision meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage2Mode {
    #[default]
    FreezeScore,
    JointScore,
}

/// Trained parts of the combined score+reconstruction scheme.
#[derive(Debug, Clone)]
pub struct CldaeLocal {
    /// Scalar soft-decision network (first code entry).
    pub score: MlpNetwork,
    /// Residual compressor producing the remaining M-1 code entries.
    pub residual: MlpNetwork,
    /// Decoder reconstructing the features from the M-wide code.
    pub decoder: MlpNetwork,
    pub score_report: TrainReport,
    pub recon_report: TrainReport,
}

/// Trains one sensor's combined scheme: a soft-decision stage identical to
/// [`train_ld_local`], then a reconstruction stage around the fixed score.
///
/// `train`/`val` are labeled single-sensor sets; reconstruction targets are
/// the inputs rescaled elementwise by `target_scale` (pass the per-feature
/// raw standard deviations when inputs are standardized, or unit scales to
/// reconstruct the inputs as-is). Requires M >= 2.
pub fn train_cldae_local(
    train_set: &TrainSet,
    val_set: &TrainSet,
    m: usize,
    target_scale: &[f64],
    cfg: &TrainConfig,
    mode: Stage2Mode,
) -> Result<CldaeLocal, SchemeError> {
    if m < 2 {
        return Err(SchemeError::Config(
            "combined scheme needs M >= 2; at M = 1 it reduces to LD, train that instead".into(),
        ));
    }
    let ld = train_ld_local(train_set, val_set, cfg)?;
    let ((residual, score_after), decoder, recon_report) =
        train_cldae_stage2(&ld.net, train_set, val_set, m, target_scale, cfg, mode)?;
    let score = match mode {
        Stage2Mode::FreezeScore => ld.net,
        Stage2Mode::JointScore => score_after,
    };
    Ok(CldaeLocal {
        score,
        residual,
        decoder,
        score_report: ld.report,
        recon_report,
    })
}

/// Reconstruction stage of the combined scheme around an already trained
/// score network. Returns ((residual, score-after-stage2), decoder, report);
/// with [`Stage2Mode::FreezeScore`] the returned score equals the input one.
#[allow(clippy::type_complexity)]
pub fn train_cldae_stage2(
    score: &MlpNetwork,
    train_set: &TrainSet,
    val_set: &TrainSet,
    m: usize,
    target_scale: &[f64],
    cfg: &TrainConfig,
    mode: Stage2Mode,
) -> Result<((MlpNetwork, MlpNetwork), MlpNetwork, TrainReport), SchemeError> {
    if m < 2 {
        return Err(SchemeError::Config(
            "combined scheme needs M >= 2; at M = 1 it reduces to LD, train that instead".into(),
        ));
    }
    check_single_sensor(train_set, 1, "combined-scheme train")?;
    check_single_sensor(val_set, 1, "combined-scheme validation")?;
    if score.input_dim() != SENSOR_FEATURES || score.output_dim() != 1 {
        return Err(SchemeError::Config(
            "score network must map 4 features to a scalar".into(),
        ));
    }
    let recon_train = scaled_recon_set(train_set, target_scale)?;
    let recon_val = scaled_recon_set(val_set, target_scale)?;
    let mut stage2_cfg = cfg.clone();
    stage2_cfg.seed = seeding::derive(cfg.seed, &["stage2", &m.to_string()]);
    let residual = residual_network(m, init_seed(&stage2_cfg, &["residual"]))?;
    let decoder = decoder_network(m, init_seed(&stage2_cfg, &["decoder"]))?;
    let train_score = mode == Stage2Mode::JointScore;
    let mut graph = TrainGraph::branch_trunk(
        vec![
            TrainBranch::new(score.clone(), 0, train_score),
            TrainBranch::new(residual, 0, true),
        ],
        decoder,
    )?;
    let report = fit(&mut graph, &recon_train, &recon_val, &stage2_cfg)?;
    let (mut branches, trunk) = graph.into_parts();
    let residual = branches.pop().unwrap().net;
    let score_after = branches.pop().unwrap().net;
    Ok(((residual, score_after), trunk.unwrap(), report))
}

/// Reconstruction view of a labeled set: targets are the inputs rescaled
/// elementwise by `target_scale`.
fn scaled_recon_set(set: &TrainSet, target_scale: &[f64]) -> Result<TrainSet, SchemeError> {
    let k = set.input_dim();
    if target_scale.len() != k {
        return Err(SchemeError::Config(format!(
            "target_scale has {} entries, features have {k}",
            target_scale.len()
        )));
    }
    let inputs = set.inputs().to_vec();
    let targets: Vec<f64> = inputs
        .iter()
        .enumerate()
        .map(|(i, &v)| v * target_scale[i % k])
        .collect();
    Ok(TrainSet::new(inputs, targets, k, k)?)
}
