//! Noise-level estimation from a single noisy channel realization.
//!
//! All estimates are reported as the complex-noise standard deviation
//! `sigma_hat`, so the per-real-component variance is `sigma_hat^2 / 2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::exact_sqrt;
use crate::dft;
use crate::error::{Error, Result};
use crate::linalg::complexify_vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMethod {
    Pca,
    Mad,
    Oracle,
}

impl NoiseMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            NoiseMethod::Pca => "pca",
            NoiseMethod::Mad => "mad",
            NoiseMethod::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma_hat: f64,
    pub method: NoiseMethod,
    /// Zero-based index of the first eigenvalue in the accepted tail (PCA only).
    pub split_index: Option<usize>,
    /// Accepted tail mean (PCA only).
    pub tail_mean: Option<f64>,
    /// Set when no split passed the acceptance test.
    pub fallback: bool,
}

impl NoiseEstimate {
    /// Per-real-component noise variance.
    pub fn real_variance(&self) -> f64 {
        self.sigma_hat * self.sigma_hat / 2.0
    }
}

/// Sliding-window patches of the `side x side x 2` real channel tensor.
///
/// Columns are ordered by window position (row-major over the top-left
/// corner). Within a column the entries run over the real plane first,
/// then the imaginary plane; inside a plane row-major over the window.
#[derive(Debug, Clone)]
pub struct VscMatrix {
    pub data: DMatrix<f64>,
    pub side: usize,
    pub window: usize,
}

impl VscMatrix {
    pub fn n_windows(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }
}

/// `r` is the real-stacked channel `[Re; Im]`, each half a row-major grid.
pub fn extract_vscs(r: &[f64], d: usize) -> Result<VscMatrix> {
    let n = r.len() / 2;
    if !r.len().is_multiple_of(2) || n == 0 {
        return Err(Error::InvalidConfig(format!("real channel length {} is not 2N", r.len())));
    }
    let side = exact_sqrt(n).ok_or_else(|| Error::InvalidConfig(format!("N = {n} is not a square")))?;
    let w = exact_sqrt(d).ok_or_else(|| Error::InvalidWindow(format!("d = {d} is not a square")))?;
    if d == 0 || w > side {
        return Err(Error::InvalidWindow(format!("window {w}x{w} does not fit a {side}x{side} array")));
    }
    let per_axis = side - w + 1;
    let s = per_axis * per_axis;
    let mut data = DMatrix::zeros(2 * d, s);
    for i in 0..per_axis {
        for j in 0..per_axis {
            let mut col = data.column_mut(i * per_axis + j);
            let mut k = 0;
            for plane in 0..2 {
                let base = plane * n;
                for di in 0..w {
                    let row = base + (i + di) * side + j;
                    for dj in 0..w {
                        col[k] = r[row + dj];
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(VscMatrix { data, side, window: d })
}

/// Biased (1/s) covariance of the window vectors.
pub fn vsc_covariance(v: &VscMatrix) -> DMatrix<f64> {
    let s = v.n_windows() as f64;
    let mean = v.data.column_mean();
    let mut centered = v.data.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let mut cov = &centered * centered.transpose();
    cov /= s;
    cov
}

/// Covariance eigenvalues sorted descending (ties keep their original order).
pub fn vsc_spectrum(r: &[f64], d: usize) -> Result<Vec<f64>> {
    let v = extract_vscs(r, d)?;
    let cov = vsc_covariance(&v);
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

pub fn median(sorted_or_not: &[f64]) -> f64 {
    let mut x = sorted_or_not.to_vec();
    x.sort_by(f64::total_cmp);
    let k = x.len();
    if k % 2 == 1 {
        x[k / 2]
    } else {
        0.5 * (x[k / 2 - 1] + x[k / 2])
    }
}

/// Result of scanning a descending spectrum for the noise tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSplit {
    pub index: usize,
    pub tail_mean: f64,
    pub fallback: bool,
}

/// Tolerance on `mean - median` for a pure-noise tail of length `k`.
///
/// The eigenvalues of a pure-noise tail scatter around the noise variance
/// with relative spread `sqrt(2 dim / s)`; the sample mean and median of `k`
/// such values then differ by about `sqrt((pi/2 - 1) / k)` spreads.
pub fn tail_tolerance(dim: usize, n_windows: usize, k: usize) -> f64 {
    let spread = (2.0 * dim as f64 / n_windows as f64).sqrt();
    spread * ((std::f64::consts::FRAC_PI_2 - 1.0) / k as f64).sqrt()
}

/// First `i` whose tail `{lambda_i, ...}` has mean no larger than its median
/// plus the pure-noise tolerance; falls back to the smallest eigenvalue.
pub fn split_tail(spectrum: &[f64], n_windows: usize) -> Result<TailSplit> {
    if spectrum.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = spectrum.len();
    let mut suffix = vec![0.0; dim + 1];
    for i in (0..dim).rev() {
        suffix[i] = suffix[i + 1] + spectrum[i];
    }
    for i in 0..dim {
        let tail = &spectrum[i..];
        let k = tail.len();
        let tau = suffix[i] / k as f64;
        // tail is descending, so its median is read off directly
        let med = if k % 2 == 1 { tail[k / 2] } else { 0.5 * (tail[k / 2 - 1] + tail[k / 2]) };
        if tau - med <= tail_tolerance(dim, n_windows, k) * tau {
            return Ok(TailSplit { index: i, tail_mean: tau, fallback: false });
        }
    }
    Ok(TailSplit { index: dim - 1, tail_mean: spectrum[dim - 1], fallback: true })
}

/// PCA eigen-tail estimate on the real-stacked noisy channel.
pub fn pca_noise_level(r: &[f64], d: usize) -> Result<NoiseEstimate> {
    let v = extract_vscs(r, d)?;
    let s = v.n_windows();
    let mut ev: Vec<f64> = vsc_covariance(&v).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let split = split_tail(&ev, s)?;
    let tau = split.tail_mean.max(0.0);
    Ok(NoiseEstimate {
        sigma_hat: (2.0 * tau).sqrt(),
        method: NoiseMethod::Pca,
        split_index: Some(split.index),
        tail_mean: Some(tau),
        fallback: split.fallback,
    })
}

/// Median-absolute-value estimate in the 2-D angular (DFT) domain.
pub fn mad_noise_level(r: &[f64]) -> Result<NoiseEstimate> {
    if r.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut z = complexify_vec(r);
    dft::forward(&mut z)?;
    let mags: Vec<f64> = z.iter().map(|c| c.norm()).collect();
    Ok(NoiseEstimate {
        sigma_hat: median(&mags) / std::f64::consts::LN_2.sqrt(),
        method: NoiseMethod::Mad,
        split_index: None,
        tail_mean: None,
        fallback: false,
    })
}

/// `sqrt(sum_i m_i^2 / N)` of the true residual, with `2N` real components.
pub fn oracle_noise_level(noisy: &[f64], truth: &[f64]) -> Result<NoiseEstimate> {
    if noisy.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: noisy.len() });
    }
    if noisy.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = noisy.len() as f64 / 2.0;
    let ss: f64 = noisy.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(NoiseEstimate {
        sigma_hat: (ss / n).sqrt(),
        method: NoiseMethod::Oracle,
        split_index: None,
        tail_mean: None,
        fallback: false,
    })
}
