//! Estimator aggregation, QQ data, moment normality checks and scaling fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub method: String,
    /// `|sigma - mean(sigma_hat)|`
    pub bias: f64,
    /// Population standard deviation of the estimates.
    pub std: f64,
    /// `sqrt(mean((sigma_hat - sigma)^2))`
    pub rmse: f64,
    pub trials: usize,
    /// Per-trial runtimes in seconds (may be empty).
    pub runtimes: Vec<f64>,
}

impl EstimatorReport {
    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    pub fn with_runtimes(mut self, runtimes: Vec<f64>) -> Self {
        self.runtimes = runtimes;
        self
    }

    pub fn mean_runtime(&self) -> f64 {
        if self.runtimes.is_empty() {
            0.0
        } else {
            self.runtimes.iter().sum::<f64>() / self.runtimes.len() as f64
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Bias, std and RMSE of `estimates` against the true value `truth`.
/// With these definitions `rmse^2 = bias^2 + std^2`.
pub fn aggregate(estimates: &[f64], truth: f64) -> Result<EstimatorReport> {
    if estimates.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: estimates.len() });
    }
    let m = mean(estimates);
    let var = estimates.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / estimates.len() as f64;
    let mse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / estimates.len() as f64;
    Ok(EstimatorReport {
        method: String::new(),
        bias: (truth - m).abs(),
        std: var.sqrt(),
        rmse: mse.sqrt(),
        trials: estimates.len(),
        runtimes: Vec::new(),
    })
}

fn standardize(sample: &[f64]) -> Result<Vec<f64>> {
    let m = mean(sample);
    let sd = (sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / sample.len() as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(sample.iter().map(|x| (x - m) / sd).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    /// Plotting position `(i - 0.5) / n`.
    pub p: f64,
    pub theoretical: f64,
    pub sample: f64,
}

/// Standard-normal quantiles against the sorted, standardized sample.
pub fn qq_points(sample: &[f64]) -> Result<Vec<QqPoint>> {
    if sample.len() < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: sample.len() });
    }
    let mut z = standardize(sample)?;
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = z.len() as f64;
    Ok(z.into_iter()
        .enumerate()
        .map(|(i, s)| {
            let p = (i as f64 + 0.5) / n;
            QqPoint { p, theoretical: normal.inverse_cdf(p), sample: s }
        })
        .collect())
}

/// Largest `|sample - theoretical|` over plotting positions inside the
/// central `coverage` probability range.
pub fn qq_max_deviation(points: &[QqPoint], coverage: f64) -> f64 {
    let lo = (1.0 - coverage) / 2.0;
    let hi = 1.0 - lo;
    points
        .iter()
        .filter(|q| q.p >= lo && q.p <= hi)
        .map(|q| (q.sample - q.theoretical).abs())
        .fold(0.0, f64::max)
}

pub const SKEW_LIMIT: f64 = 0.15;
pub const KURTOSIS_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityStats {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub pass: bool,
}

/// Moment skewness and excess kurtosis with a fixed pass gate.
pub fn normality_stats(sample: &[f64]) -> Result<NormalityStats> {
    if sample.len() < 100 {
        return Err(Error::TooFewSamples { needed: 100, got: sample.len() });
    }
    let z = standardize(sample)?;
    let skewness = mean(&z.iter().map(|v| v * v * v).collect::<Vec<_>>());
    let excess_kurtosis = mean(&z.iter().map(|v| v * v * v * v).collect::<Vec<_>>()) - 3.0;
    Ok(NormalityStats {
        skewness,
        excess_kurtosis,
        pass: skewness.abs() < SKEW_LIMIT && excess_kurtosis.abs() < KURTOSIS_LIMIT,
    })
}

/// Least-squares slope of `ln(runtimes)` against `ln(sizes)`.
pub fn loglog_slope(sizes: &[f64], runtimes: &[f64]) -> Result<f64> {
    if sizes.len() != runtimes.len() {
        return Err(Error::DimensionMismatch { expected: sizes.len(), got: runtimes.len() });
    }
    if sizes.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: sizes.len() });
    }
    if sizes.iter().chain(runtimes).any(|v| !(*v > 0.0)) {
        return Err(Error::NonPositive);
    }
    let x: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = runtimes.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&x), mean(&y));
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(sxy / sxx)
}
