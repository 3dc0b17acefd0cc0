//! Gaussian kernel density estimation with exact CDF inversion.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::DatagenError;

/// Default inversion tolerance on |cdf(x) − u|.
pub const INVERSION_TOL: f64 = 1e-10;

/// Kernel bandwidth selection for [`fit_kde`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthRule {
    /// 1.06 · σ̂ · n^(−1/5) with the unbiased sample deviation σ̂.
    Silverman,
    /// Explicit bandwidth, must be positive.
    Fixed(f64),
}

/// Gaussian KDE: an equal-weight mixture of normals at the data points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    centers: Vec<f64>,
    bandwidth: f64,
    min_center: f64,
    max_center: f64,
}

impl KdeModel {
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Lower end of the default inversion bracket, `min(center) − 10h`.
    pub fn support_lo(&self) -> f64 {
        self.min_center - 10.0 * self.bandwidth
    }

    /// Upper end of the default inversion bracket, `max(center) + 10h`.
    pub fn support_hi(&self) -> f64 {
        self.max_center + 10.0 * self.bandwidth
    }

    /// Density at `x`: mean of the kernel densities.
    pub fn pdf(&self, x: f64) -> f64 {
        let kernel = Normal::new(0.0, self.bandwidth).unwrap();
        let sum: f64 = self.centers.iter().map(|&c| kernel.pdf(x - c)).sum();
        sum / self.centers.len() as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        kde_cdf(self, x)
    }

    pub fn inverse_cdf(&self, u: f64, tol: f64) -> Result<f64, DatagenError> {
        kde_inverse_cdf(self, u, tol)
    }

    /// Tabulates the exact CDF on an x-grid for fast approximate inversion.
    pub fn inverse_table(&self, points: usize) -> InverseTable {
        InverseTable::build(self, points)
    }
}

/// Fits a Gaussian KDE with the series as centers.
pub fn fit_kde(series: &[f64], rule: BandwidthRule) -> Result<KdeModel, DatagenError> {
    if series.len() < 2 {
        return Err(DatagenError::DegenerateSeries(format!(
            "need at least 2 points, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(DatagenError::DegenerateSeries("non-finite value".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(DatagenError::DegenerateSeries(
            "zero variance (all values equal)".into(),
        ));
    }
    let bandwidth = match rule {
        BandwidthRule::Silverman => 1.06 * var.sqrt() * n.powf(-0.2),
        BandwidthRule::Fixed(h) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(DatagenError::InvalidSpec(format!(
                    "fixed bandwidth must be positive, got {h}"
                )));
            }
            h
        }
    };
    let min_center = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max_center = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(KdeModel {
        centers: series.to_vec(),
        bandwidth,
        min_center,
        max_center,
    })
}

/// Exact KDE CDF: mean of the kernel CDFs.
pub fn kde_cdf(model: &KdeModel, x: f64) -> f64 {
    let std = Normal::standard();
    let h = model.bandwidth;
    let sum: f64 = model.centers.iter().map(|&c| std.cdf((x - c) / h)).sum();
    sum / model.centers.len() as f64
}

/// Inverts the KDE CDF by bracketing plus bisection.
///
/// The bracket starts at `[min(center) − 10h, max(center) + 10h]` and is
/// widened geometrically for quantiles beyond it.
pub fn kde_inverse_cdf(model: &KdeModel, u: f64, tol: f64) -> Result<f64, DatagenError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(DatagenError::QuantileDomain(u));
    }
    if !(tol > 0.0) {
        return Err(DatagenError::InvalidSpec(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut lo = model.support_lo();
    let mut hi = model.support_hi();
    let mut step = 10.0 * model.bandwidth;
    while kde_cdf(model, lo) > u {
        lo -= step;
        step *= 2.0;
    }
    step = 10.0 * model.bandwidth;
    while kde_cdf(model, hi) < u {
        hi += step;
        step *= 2.0;
    }
    let mut best_x = lo + (hi - lo) / 2.0;
    let mut best_err = f64::INFINITY;
    loop {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let f = kde_cdf(model, mid);
        let err = (f - u).abs();
        if err < best_err {
            best_err = err;
            best_x = mid;
        }
        if err <= tol {
            return Ok(mid);
        }
        if f < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best_err <= tol {
        Ok(best_x)
    } else {
        Err(DatagenError::InversionTolerance {
            achieved: best_err,
            tol,
        })
    }
}

/// Monotone piecewise-linear inverse of a KDE CDF.
///
/// Grid nodes carry exact CDF values; inversion between nodes interpolates
/// linearly, with error far below what distribution tests at realistic
/// sample sizes can resolve. Quantiles outside the tabulated range fall back
/// to exact bisection.
#[derive(Debug, Clone)]
pub struct InverseTable {
    xs: Vec<f64>,
    us: Vec<f64>,
}

impl InverseTable {
    fn build(model: &KdeModel, points: usize) -> Self {
        assert!(points >= 2, "table needs at least 2 nodes");
        let lo = model.support_lo();
        let hi = model.support_hi();
        let mut xs = Vec::with_capacity(points);
        let mut us = Vec::with_capacity(points);
        let mut last_u = f64::NEG_INFINITY;
        for i in 0..points {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let u = kde_cdf(model, x);
            // Keep the node sequence strictly monotone so interpolation
            // stays well-defined where the CDF is float-flat.
            if u > last_u {
                xs.push(x);
                us.push(u);
                last_u = u;
            }
        }
        Self { xs, us }
    }

    /// Approximate quantile via binary search plus linear interpolation.
    pub fn invert(&self, model: &KdeModel, u: f64) -> Result<f64, DatagenError> {
        if !(u > 0.0 && u < 1.0) {
            return Err(DatagenError::QuantileDomain(u));
        }
        if u < self.us[0] || u > *self.us.last().unwrap() {
            return kde_inverse_cdf(model, u, INVERSION_TOL);
        }
        let j = self.us.partition_point(|&v| v < u);
        if j == 0 {
            return Ok(self.xs[0]);
        }
        let (u0, u1) = (self.us[j - 1], self.us[j]);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let t = (u - u0) / (u1 - u0);
        Ok(x0 + t * (x1 - x0))
    }
}
