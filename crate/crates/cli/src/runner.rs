//! Sweep execution: one dataset per (coupling, seed) group, every requested
//! scheme/width cell trained on it, artifacts merged at the end.
//!
//! Groups are independent jobs: a group draws its dataset, fits the feature
//! scaler on the training split, trains the per-sensor soft-decision nets
//! once (they are shared by the LD cell and every combined-scheme cell) and
//! then runs each cell. Workers only share the job queue and the outcome
//! list, so the artifacts are identical for any `--jobs` value.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use uwan_auth::datagen::{split_dataset, DatasetGenerator, FeatureDataset, ReferenceScenario};
use uwan_auth::eval::{compute_rates, optimize_threshold};
use uwan_auth::nn::{TrainConfig, TrainSet};
use uwan_auth::schemes::{
    parse_global_config, rows_labeled, sensor_features_scaled, sensor_labeled, train_ae_local,
    train_cldae_stage2, train_fusion, train_global, train_ld_local, AuthenticatorBundle,
    BundleMeta, FeatureScaler, LdLocal, LocalEncoder, SchemeError, Stage2Mode,
};
use uwan_auth::seeding;

use crate::config::{ExperimentConfig, SchemeKind};
use crate::plot;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot prepare {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario setup failed: {0}")]
    Scenario(#[from] uwan_auth::datagen::DatagenError),
    #[error("results export failed: {0}")]
    Csv(#[from] csv::Error),
}

/// One evaluated cell: threshold picked on the validation split, rates on
/// the held-out test split.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub scheme: String,
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
    pub lambda: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub epsilon: f64,
    /// Architecture notation for globally trained cells; not a CSV column,
    /// used for bundle naming and sort stability.
    pub notation: Option<String>,
}

/// A cell that errored; the sweep continues past it.
#[derive(Debug, Clone)]
pub struct CellFailure {
    pub scheme: String,
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
    pub csv_path: PathBuf,
    pub plot_path: PathBuf,
}

/// Cell shape after canonicalization (combined scheme at width 1 runs as
/// the plain soft-decision scheme).
#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Local { scheme: SchemeKind, m: usize },
    Global { notation: String },
}

impl Cell {
    fn scheme_name(&self) -> &str {
        match self {
            Cell::Local { scheme, .. } => scheme.name(),
            Cell::Global { .. } => SchemeKind::Global.name(),
        }
    }

    fn m(&self, n_sensors: usize) -> usize {
        match self {
            Cell::Local { m, .. } => *m,
            // Notations are validated before the run, so the parse cannot
            // fail here; fall back to 0 rather than unwrapping.
            Cell::Global { notation } => parse_global_config(notation, n_sensors)
                .map(|gc| gc.m())
                .unwrap_or(0),
        }
    }
}

/// Expands the configured sweep into concrete cells, deduplicated after
/// canonicalization.
fn expand_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    let mut push = |cell: Cell| {
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    };
    for &scheme in &config.schemes {
        match scheme {
            SchemeKind::Ae => {
                for &m in &config.ms {
                    push(Cell::Local { scheme, m });
                }
            }
            SchemeKind::Ld => push(Cell::Local { scheme, m: 1 }),
            SchemeKind::Cldae => {
                for &m in &config.ms {
                    if m == 1 {
                        push(Cell::Local {
                            scheme: SchemeKind::Ld,
                            m: 1,
                        });
                    } else {
                        push(Cell::Local { scheme, m });
                    }
                }
            }
            SchemeKind::Global => {
                for notation in &config.global_notations {
                    push(Cell::Global {
                        notation: notation.clone(),
                    });
                }
            }
        }
    }
    cells
}

/// Stable tag for a coupling value, used in seed derivation and filenames.
fn alpha_key(alpha: f64) -> String {
    format!("{alpha}")
}

fn bundle_file_name(row: &ResultRow) -> String {
    let mut name = format!("{}_m{}", row.scheme.to_lowercase(), row.m);
    if let Some(notation) = &row.notation {
        name.push('_');
        name.extend(notation.chars().map(|c| if c == '|' { '_' } else { c }));
    }
    format!("{name}_alpha{}_seed{}.json", alpha_key(row.alpha), row.seed)
}

/// Everything one (coupling, seed) group derives from its dataset before
/// any cell runs.
struct GroupData {
    val: FeatureDataset,
    test: FeatureDataset,
    std_train: FeatureDataset,
    std_val: FeatureDataset,
    scaler: FeatureScaler,
}

fn build_group_data(
    config: &ExperimentConfig,
    generator: &DatasetGenerator<'_>,
    alpha: f64,
    seed: u64,
) -> Result<GroupData, SchemeError> {
    let key = alpha_key(alpha);
    let mut data_rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, &["data", &key]));
    let dataset = generator.generate(alpha, config.samples_per_class, &mut data_rng)?;
    let mut split_rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, &["split", &key]));
    let (train, val, test) = split_dataset(&dataset, config.split, &mut split_rng)?;
    let scaler = FeatureScaler::fit(&train)?;
    let std_train = scaler.standardize_dataset(&train)?;
    let std_val = scaler.standardize_dataset(&val)?;
    Ok(GroupData {
        val,
        test,
        std_train,
        std_val,
        scaler,
    })
}

/// Per-group training state: precomputed per-sensor sets and the shared
/// soft-decision nets, trained at most once per sensor.
struct GroupTrainer<'a> {
    config: &'a ExperimentConfig,
    data: &'a GroupData,
    cell_seed: u64,
    labeled_train: Vec<TrainSet>,
    labeled_val: Vec<TrainSet>,
    recon_train: Vec<TrainSet>,
    recon_val: Vec<TrainSet>,
    ld_cache: Vec<Option<LdLocal>>,
}

impl<'a> GroupTrainer<'a> {
    fn new(
        config: &'a ExperimentConfig,
        data: &'a GroupData,
        alpha: f64,
        seed: u64,
    ) -> Result<Self, SchemeError> {
        let n = config.n_sensors;
        let k = config.n_features;
        let mut labeled_train = Vec::with_capacity(n);
        let mut labeled_val = Vec::with_capacity(n);
        let mut recon_train = Vec::with_capacity(n);
        let mut recon_val = Vec::with_capacity(n);
        for sensor in 0..n {
            labeled_train.push(sensor_labeled(&data.std_train, sensor)?);
            labeled_val.push(sensor_labeled(&data.std_val, sensor)?);
            let scales = data.scaler.sensor_scales(sensor, k);
            recon_train.push(sensor_features_scaled(&data.std_train, sensor, scales)?);
            recon_val.push(sensor_features_scaled(&data.std_val, sensor, scales)?);
        }
        Ok(Self {
            config,
            data,
            cell_seed: seeding::derive(seed, &["alpha", &alpha_key(alpha)]),
            labeled_train,
            labeled_val,
            recon_train,
            recon_val,
            ld_cache: vec![None; n],
        })
    }

    fn sensor_cfg(&self, sensor: usize) -> TrainConfig {
        let seed = seeding::derive(self.cell_seed, &["local", &sensor.to_string()]);
        self.config.train.config_with_seed(seed)
    }

    /// The soft-decision net of one sensor; identical across every cell of
    /// the group that needs it.
    fn ld_local(&mut self, sensor: usize) -> Result<&LdLocal, SchemeError> {
        if self.ld_cache[sensor].is_none() {
            let trained = train_ld_local(
                &self.labeled_train[sensor],
                &self.labeled_val[sensor],
                &self.sensor_cfg(sensor),
            )?;
            self.ld_cache[sensor] = Some(trained);
        }
        Ok(self.ld_cache[sensor].as_ref().unwrap())
    }

    fn local_encoders(&mut self, scheme: SchemeKind, m: usize) -> Result<Vec<LocalEncoder>, SchemeError> {
        let n = self.config.n_sensors;
        let mut encoders = Vec::with_capacity(n);
        for sensor in 0..n {
            let encoder = match scheme {
                SchemeKind::Ae => {
                    let ae = train_ae_local(
                        &self.recon_train[sensor],
                        &self.recon_val[sensor],
                        m,
                        &self.sensor_cfg(sensor),
                    )?;
                    LocalEncoder::Ae {
                        encoder: ae.encoder,
                    }
                }
                SchemeKind::Ld => LocalEncoder::Ld {
                    net: self.ld_local(sensor)?.net.clone(),
                },
                SchemeKind::Cldae => {
                    let score = self.ld_local(sensor)?.net.clone();
                    let scales = self.data.scaler.sensor_scales(sensor, self.config.n_features);
                    let ((residual, _), _, _) = train_cldae_stage2(
                        &score,
                        &self.labeled_train[sensor],
                        &self.labeled_val[sensor],
                        m,
                        scales,
                        &self.sensor_cfg(sensor),
                        Stage2Mode::FreezeScore,
                    )?;
                    LocalEncoder::Cldae { score, residual }
                }
                SchemeKind::Global => unreachable!("global cells use train_global"),
            };
            encoders.push(encoder);
        }
        Ok(encoders)
    }

    fn run_cell(&mut self, cell: &Cell, alpha: f64, seed: u64) -> Result<ResultRow, SchemeError> {
        let (encoders, fusion, notation) = match cell {
            Cell::Local { scheme, m } => {
                let encoders = self.local_encoders(*scheme, *m)?;
                let fusion_seed = seeding::derive(
                    self.cell_seed,
                    &["fusion", scheme.name(), &m.to_string()],
                );
                let cfg = self.config.train.config_with_seed(fusion_seed);
                let (fusion, _) =
                    train_fusion(&encoders, &self.data.std_train, &self.data.std_val, &cfg)?;
                (encoders, fusion, None)
            }
            Cell::Global { notation } => {
                let gc = parse_global_config(notation, self.config.n_sensors)?;
                let rows_train = rows_labeled(&self.data.std_train)?;
                let rows_val = rows_labeled(&self.data.std_val)?;
                let cfg_seed = seeding::derive(self.cell_seed, &["global", notation]);
                let cfg = self.config.train.config_with_seed(cfg_seed);
                let trained = train_global(&gc, &rows_train, &rows_val, &cfg)?;
                let encoders = trained
                    .locals
                    .into_iter()
                    .map(|net| LocalEncoder::Subnet { net })
                    .collect();
                (encoders, trained.sink, Some(notation.clone()))
            }
        };
        let meta = BundleMeta {
            scheme: cell.scheme_name().to_string(),
            m: cell.m(self.config.n_sensors),
            alpha,
            seed,
            notation: notation.clone(),
        };
        let mut bundle =
            AuthenticatorBundle::new(meta, self.data.scaler.clone(), encoders, fusion)?;
        let val_scores = bundle.score_dataset(&self.data.val)?;
        let (lambda, _) = optimize_threshold(&val_scores)?;
        let test_scores = bundle.score_dataset(&self.data.test)?;
        let (p_fa, p_md, epsilon) = compute_rates(&test_scores, lambda)?;
        bundle.set_threshold(lambda)?;
        let row = ResultRow {
            scheme: cell.scheme_name().to_string(),
            m: bundle.m(),
            alpha,
            seed,
            lambda,
            p_fa,
            p_md,
            epsilon,
            notation,
        };
        let path = self.bundle_dir().join(bundle_file_name(&row));
        bundle.save(&path)?;
        Ok(row)
    }

    fn bundle_dir(&self) -> PathBuf {
        self.config.output_dir.join("bundles")
    }
}

/// Runs the full sweep. Cell errors are collected, not fatal; the summary
/// tells the caller whether any cell failed.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<RunSummary, RunError> {
    let out_dir = &config.output_dir;
    let bundle_dir = out_dir.join("bundles");
    fs::create_dir_all(&bundle_dir).map_err(|source| RunError::Io {
        path: bundle_dir.clone(),
        source,
    })?;

    let scenario = ReferenceScenario::named(&config.scenario)?;
    let bank = scenario.bank(config.n_sensors, config.n_features)?;
    let generator = DatasetGenerator::new(&bank);
    let cells = expand_cells(config);

    let groups: Vec<(f64, u64)> = config
        .alphas
        .iter()
        .flat_map(|&alpha| config.seeds.iter().map(move |&seed| (alpha, seed)))
        .collect();
    let next_group = AtomicUsize::new(0);
    let rows: Mutex<Vec<ResultRow>> = Mutex::new(Vec::new());
    let failures: Mutex<Vec<CellFailure>> = Mutex::new(Vec::new());

    let worker = || {
        loop {
            let index = next_group.fetch_add(1, Ordering::Relaxed);
            let Some(&(alpha, seed)) = groups.get(index) else {
                break;
            };
            run_group(
                config, &generator, &cells, alpha, seed, &rows, &failures,
            );
        }
    };
    let jobs = jobs.max(1);
    if jobs == 1 {
        worker();
    } else {
        thread::scope(|scope| {
            for _ in 0..jobs.min(groups.len()) {
                scope.spawn(|| worker());
            }
        });
    }

    let mut rows = rows.into_inner().unwrap();
    let mut failures = failures.into_inner().unwrap();
    sort_rows(&mut rows);
    failures.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.m.cmp(&b.m))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.seed.cmp(&b.seed))
    });

    let csv_path = out_dir.join("results.csv");
    write_results_csv(&csv_path, &rows)?;
    let plot_path = out_dir.join("epsilon_vs_alpha.svg");
    let svg = plot::epsilon_vs_alpha(&seed_mean_curves(&rows));
    fs::write(&plot_path, svg).map_err(|source| RunError::Io {
        path: plot_path.clone(),
        source,
    })?;

    Ok(RunSummary {
        rows,
        failures,
        csv_path,
        plot_path,
    })
}

fn run_group(
    config: &ExperimentConfig,
    generator: &DatasetGenerator<'_>,
    cells: &[Cell],
    alpha: f64,
    seed: u64,
    rows: &Mutex<Vec<ResultRow>>,
    failures: &Mutex<Vec<CellFailure>>,
) {
    let data = match build_group_data(config, generator, alpha, seed) {
        Ok(data) => data,
        Err(e) => {
            // Without the dataset every cell of the group is lost; account
            // for each so the row/failure tally still covers the full grid.
            let mut failed = failures.lock().unwrap();
            for cell in cells {
                failed.push(CellFailure {
                    scheme: cell.scheme_name().to_string(),
                    m: cell.m(config.n_sensors),
                    alpha,
                    seed,
                    message: format!("dataset preparation failed: {e}"),
                });
            }
            eprintln!("alpha={alpha} seed={seed}: dataset preparation failed: {e}");
            return;
        }
    };
    let mut trainer = match GroupTrainer::new(config, &data, alpha, seed) {
        Ok(trainer) => trainer,
        Err(e) => {
            let mut failed = failures.lock().unwrap();
            for cell in cells {
                failed.push(CellFailure {
                    scheme: cell.scheme_name().to_string(),
                    m: cell.m(config.n_sensors),
                    alpha,
                    seed,
                    message: format!("sensor set preparation failed: {e}"),
                });
            }
            eprintln!("alpha={alpha} seed={seed}: sensor set preparation failed: {e}");
            return;
        }
    };
    for cell in cells {
        match trainer.run_cell(cell, alpha, seed) {
            Ok(row) => {
                eprintln!(
                    "alpha={alpha} seed={seed} {} M={}: epsilon={:.6}",
                    row.scheme, row.m, row.epsilon
                );
                rows.lock().unwrap().push(row);
            }
            Err(e) => {
                let failure = CellFailure {
                    scheme: cell.scheme_name().to_string(),
                    m: cell.m(config.n_sensors),
                    alpha,
                    seed,
                    message: e.to_string(),
                };
                eprintln!(
                    "alpha={alpha} seed={seed} {} M={}: FAILED: {e}",
                    failure.scheme, failure.m
                );
                failures.lock().unwrap().push(failure);
            }
        }
    }
}

/// Deterministic result order: scheme, code width, coupling, seed (notation
/// breaks ties between globally trained cells of equal width).
fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.m.cmp(&b.m))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.seed.cmp(&b.seed))
            .then(a.notation.cmp(&b.notation))
    });
}

fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), RunError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["scheme", "M", "alpha", "seed", "lambda", "p_fa", "p_md", "epsilon"])?;
    for row in rows {
        writer.write_record([
            row.scheme.as_str(),
            &row.m.to_string(),
            &format!("{}", row.alpha),
            &row.seed.to_string(),
            &format!("{}", row.lambda),
            &format!("{}", row.p_fa),
            &format!("{}", row.p_md),
            &format!("{}", row.epsilon),
        ])?;
    }
    writer.flush().map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Seed-averaged curve points for the summary plot, one curve per
/// (scheme, width), points ordered by coupling.
pub fn seed_mean_curves(rows: &[ResultRow]) -> Vec<plot::Curve> {
    let mut grouped: HashMap<(String, usize), HashMap<u64, (f64, usize)>> = HashMap::new();
    for row in rows {
        let curve = grouped.entry((row.scheme.clone(), row.m)).or_default();
        let (sum, count) = curve.entry(row.alpha.to_bits()).or_insert((0.0, 0));
        *sum += row.epsilon;
        *count += 1;
    }
    let mut curves: Vec<plot::Curve> = grouped
        .into_iter()
        .map(|((scheme, m), points)| {
            let mut points: Vec<(f64, f64)> = points
                .into_iter()
                .map(|(bits, (sum, count))| (f64::from_bits(bits), sum / count as f64))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            plot::Curve {
                label: format!("{scheme} M={m}"),
                points,
            }
        })
        .collect();
    curves.sort_by(|a, b| a.label.cmp(&b.label));
    curves
}
