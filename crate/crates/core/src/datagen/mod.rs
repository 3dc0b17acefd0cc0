//! Synthetic dataset generation for authentication experiments.
//!
//! The pipeline has three stages: per-(sensor, feature, class) marginal
//! models fitted with a Gaussian kernel density estimate, a shared-factor
//! Gaussian copula that couples the same feature across sensors with a
//! tunable strength `alpha`, and inverse-CDF transforms that map coupled
//! uniforms back into each marginal. A built-in reference scenario supplies
//! marginals when no measured series are available.

mod bank;
mod copula;
mod dataset;
mod kde;
mod reference;

pub use bank::MarginalBank;
pub use copula::{sample_copula_matrix, sample_copula_matrix_into, CopulaSpec};
pub use dataset::{
    generate_dataset, split_dataset, DatasetGenerator, FeatureDataset, SplitSpec,
};
pub use kde::{
    fit_kde, kde_cdf, kde_inverse_cdf, BandwidthRule, InverseTable, KdeModel, INVERSION_TOL,
};
pub use reference::{reference_marginals, ReferenceScenario};

/// Errors produced while fitting marginals or generating datasets.
#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    /// A series had too few points or zero variance to fit a density.
    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),
    /// Quantile argument outside the open interval (0, 1).
    #[error("quantile {0} is outside (0, 1)")]
    QuantileDomain(f64),
    /// Inverse-CDF bisection stalled before reaching the requested accuracy.
    #[error("inversion stalled at CDF error {achieved:e} (tolerance {tol:e})")]
    InversionTolerance { achieved: f64, tol: f64 },
    /// Structurally invalid request (dimensions, fractions, parameters).
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    /// An ingested series file lacks one (sensor, feature, class) triple.
    #[error("no series for sensor {sensor}, feature {feature}, class {class}")]
    MissingSeries {
        sensor: usize,
        feature: usize,
        class: u8,
    },
    /// Named scenario does not exist.
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    /// A generation or split request produced or received zero rows.
    #[error("dataset is empty")]
    EmptyDataset,
    /// CSV parse or write failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    /// Filesystem failure while reading or writing dataset files.
    #[error("io error: {0}")]
    Io(String),
}
