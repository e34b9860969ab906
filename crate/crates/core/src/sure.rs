//! Blind MSE prediction via Stein's unbiased risk estimate.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::noise::{pca_noise_level, NoiseEstimate};
use nalgebra::{DMatrix, DVector};

/// Where the noise level fed to the predictor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaTag {
    Pca,
    Oracle,
    Fixed,
}

impl SigmaTag {
    pub fn tag(&self) -> &'static str {
        match self {
            SigmaTag::Pca => "pca",
            SigmaTag::Oracle => "oracle",
            SigmaTag::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceMode {
    /// Closed form when the denoiser has one, Monte-Carlo otherwise.
    #[default]
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub probes: usize,
    /// Overrides the default `max(r) / 100` step.
    pub epsilon: Option<f64>,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { probes: 1, epsilon: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McDivergence {
    /// Unnormalized divergence estimate.
    pub divergence: f64,
    pub epsilon: f64,
    /// Set when `max(r) <= 0` forced a fallback step.
    pub epsilon_fallback: bool,
}

/// `max(r) / 100`; if that is not positive, `max|r| / 100`, then `1e-6`.
pub fn default_epsilon(r: &[f64]) -> (f64, bool) {
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        return (max / 100.0, false);
    }
    let max_abs = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max_abs > 0.0 {
        (max_abs / 100.0, true)
    } else {
        (1e-6, true)
    }
}

/// Average of `delta . (eta(r + eps delta) - eta(r)) / eps` over Gaussian probes.
pub fn mc_divergence<R: Rng + ?Sized>(
    den: &dyn Denoiser,
    r: &[f64],
    sigma: f64,
    rng: &mut R,
    opts: &McOptions,
) -> Result<McDivergence> {
    if r.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (epsilon, epsilon_fallback) = match opts.epsilon {
        Some(e) if e > 0.0 => (e, false),
        Some(_) => (1e-6, true),
        None => default_epsilon(r),
    };
    let base = den.denoise(r, sigma)?;
    let probes = opts.probes.max(1);
    let mut acc = 0.0;
    let mut shifted = vec![0.0; r.len()];
    let mut delta = vec![0.0; r.len()];
    for _ in 0..probes {
        for ((s, d), x) in shifted.iter_mut().zip(delta.iter_mut()).zip(r) {
            *d = rng.sample(StandardNormal);
            *s = x + epsilon * *d;
        }
        let out = den.denoise(&shifted, sigma)?;
        if out.len() != r.len() {
            return Err(Error::DimensionMismatch { expected: r.len(), got: out.len() });
        }
        acc += delta.iter().zip(out.iter().zip(&base)).map(|(d, (a, b))| d * (a - b)).sum::<f64>() / epsilon;
    }
    Ok(McDivergence { divergence: acc / probes as f64, epsilon, epsilon_fallback })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurePrediction {
    /// `||eta(r) - r||^2`
    pub fidelity: f64,
    /// `2N sigma_e^2`
    pub variance_term: f64,
    /// Unnormalized divergence.
    pub divergence_sum: f64,
    pub sure: f64,
    pub predicted_mse: f64,
    pub predicted_nmse: f64,
    /// Channel power proxy `max(||r||^2 - 2N sigma_e^2, floor)`.
    pub proxy_power: f64,
    pub proxy_floored: bool,
    pub sigma2_e: f64,
    pub sigma_source: SigmaTag,
    pub epsilon: Option<f64>,
    pub epsilon_fallback: bool,
    /// SURE came out negative; reported unclamped.
    pub negative: bool,
}

/// `max(||r||^2 - 2N sigma_e^2, 1e-6 * 2N)` and whether the floor engaged.
pub fn power_proxy(r: &[f64], sigma2_e: f64) -> (f64, bool) {
    let n2 = r.len() as f64;
    let raw = norm_sq(r) - n2 * sigma2_e;
    let floor = 1e-6 * n2;
    if raw > floor {
        (raw, false)
    } else {
        (floor, true)
    }
}

/// Combine precomputed pieces into a prediction.
pub fn assemble(
    estimate: &[f64],
    r: &[f64],
    sigma2_e: f64,
    divergence_sum: f64,
    sigma_source: SigmaTag,
) -> SurePrediction {
    let fidelity = dist_sq(estimate, r);
    let variance_term = r.len() as f64 * sigma2_e;
    let sure = fidelity - variance_term + 2.0 * sigma2_e * divergence_sum;
    let (proxy_power, proxy_floored) = power_proxy(r, sigma2_e);
    SurePrediction {
        fidelity,
        variance_term,
        divergence_sum,
        sure,
        predicted_mse: sure,
        predicted_nmse: predicted_nmse(sure, r, sigma2_e),
        proxy_power,
        proxy_floored,
        sigma2_e,
        sigma_source,
        epsilon: None,
        epsilon_fallback: false,
        negative: sure < 0.0,
    }
}

pub fn predicted_nmse(predicted_mse: f64, r: &[f64], sigma2_e: f64) -> f64 {
    predicted_mse / power_proxy(r, sigma2_e).0
}

/// SURE for `den` at `r` with per-real-component noise variance `sigma2_e`.
pub fn sure<R: Rng + ?Sized>(
    den: &dyn Denoiser,
    r: &[f64],
    sigma2_e: f64,
    mode: DivergenceMode,
    rng: &mut R,
    sigma_source: SigmaTag,
) -> Result<SurePrediction> {
    sure_with(den, r, None, sigma2_e, mode, &McOptions::default(), rng, sigma_source)
}

/// As [`sure`], reusing `estimate = eta(r)` when the caller already has it.
#[allow(clippy::too_many_arguments)]
pub fn sure_with<R: Rng + ?Sized>(
    den: &dyn Denoiser,
    r: &[f64],
    estimate: Option<&[f64]>,
    sigma2_e: f64,
    mode: DivergenceMode,
    mc: &McOptions,
    rng: &mut R,
    sigma_source: SigmaTag,
) -> Result<SurePrediction> {
    let sigma = sigma2_e.max(0.0).sqrt();
    let owned;
    let estimate = match estimate {
        Some(e) => e,
        None => {
            owned = den.denoise(r, sigma)?;
            &owned
        }
    };
    if estimate.len() != r.len() {
        return Err(Error::DimensionMismatch { expected: r.len(), got: estimate.len() });
    }
    let analytic = match mode {
        DivergenceMode::Analytic => den.divergence(r, sigma)?,
        DivergenceMode::Mc => None,
    };
    match analytic {
        Some(div) => Ok(assemble(estimate, r, sigma2_e, div, sigma_source)),
        None => {
            let est = mc_divergence(den, r, sigma, rng, mc)?;
            let mut p = assemble(estimate, r, sigma2_e, est.divergence, sigma_source);
            p.epsilon = Some(est.epsilon);
            p.epsilon_fallback = est.epsilon_fallback;
            Ok(p)
        }
    }
}

/// Full blind prediction from the pseudo-observation alone: PCA noise
/// level on `r`, then SURE of the denoiser's reported output.
pub fn blind_predict<R: Rng + ?Sized>(
    den: &dyn Denoiser,
    r: &[f64],
    window: usize,
    mode: DivergenceMode,
    rng: &mut R,
) -> Result<(NoiseEstimate, SurePrediction)> {
    let noise = pca_noise_level(r, window)?;
    let out = den.output_stage().unwrap_or(den);
    let p = sure_with(out, r, None, noise.real_variance(), mode, &McOptions::default(), rng, SigmaTag::Pca)?;
    Ok((noise, p))
}

pub const NONBLIND_FLOOR: f64 = 0.001;

/// Residual-based predictor that needs the true noise variance:
/// `2N max((||y - M h_t||^2 - m sigma_n^2) / tr(M^T M), xi)` with `m` the
/// number of complex measurements.
pub fn nonblind_predict(y: &[f64], m: &DMatrix<f64>, h_t: &[f64], sigma2_n: f64, xi: f64) -> Result<f64> {
    if m.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: y.len() });
    }
    if m.ncols() != h_t.len() {
        return Err(Error::DimensionMismatch { expected: m.ncols(), got: h_t.len() });
    }
    let mh = m * DVector::from_column_slice(h_t);
    let residual: f64 = y.iter().zip(mh.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let n_complex = y.len() as f64 / 2.0;
    let trace = m.norm_squared();
    let per_entry = ((residual - n_complex * sigma2_n) / trace).max(xi);
    Ok(h_t.len() as f64 * per_entry)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEval {
    pub true_mse: f64,
    pub true_nmse: f64,
}

/// Exact MSE of `h_next` against the truth, normalized by `||h||^2`.
pub fn true_eval(h_next: &[f64], h: &[f64]) -> Result<TruthEval> {
    if h_next.len() != h.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), got: h_next.len() });
    }
    let true_mse = dist_sq(h_next, h);
    let power = norm_sq(h);
    if power <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(TruthEval { true_mse, true_nmse: true_mse / power })
}
