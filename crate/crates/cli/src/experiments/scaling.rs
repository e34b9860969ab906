//! Runtime of the full blind predictor versus array size at fixed window.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use blindsure_core::field::sample_channel;
use blindsure_core::stats::loglog_slope;
use blindsure_core::sure::blind_predict;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{build_denoiser, trial_rng};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, fmt, write_csv, write_json};

#[derive(Debug, Clone, Serialize)]
pub struct SizeTiming {
    pub n_antennas: usize,
    pub median_s: f64,
    pub min_s: f64,
    pub mean_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub window: usize,
    pub sizes: Vec<SizeTiming>,
    /// Log-log slope of the median runtimes.
    pub slope: f64,
}

/// Minimum wall time per timing sample; short calls are repeated.
const MIN_SAMPLE_S: f64 = 0.005;

/// Sizes are sampled round-robin so load drift affects each size alike.
pub fn compute(cfg: &ExperimentConfig) -> CliResult<ScalingReport> {
    let den = build_denoiser(cfg)?;
    let mut cases = Vec::with_capacity(cfg.sizes.len());
    for (k, &n) in cfg.sizes.iter().enumerate() {
        let mut sc = cfg.scenario.clone();
        sc.n_antennas = n;
        sc.validate().map_err(|e| CliError::Config(format!("size {n}: {e}")))?;
        let mut rng = trial_rng(sc.seed, k as u64);
        let s = (sc.noise_variance() / 2.0).sqrt();
        let channel = sample_channel(&sc, &mut rng)?;
        let r: Vec<f64> = channel.real.reveal().iter().map(|x| x + s * rng.sample::<f64, _>(StandardNormal)).collect();

        // warm-up, also sizes the repeat count
        let t0 = Instant::now();
        black_box(blind_predict(den.as_ref(), &r, sc.window, cfg.divergence, &mut rng)?);
        let once = t0.elapsed().as_secs_f64().max(1e-9);
        let reps = (MIN_SAMPLE_S / once).ceil().max(1.0) as usize;
        cases.push((n, sc.window, r, rng, reps, Vec::with_capacity(cfg.trials())));
    }
    for _ in 0..cfg.trials() {
        for (_, window, r, rng, reps, samples) in cases.iter_mut() {
            let t = Instant::now();
            for _ in 0..*reps {
                black_box(blind_predict(den.as_ref(), black_box(r), *window, cfg.divergence, rng)?);
            }
            samples.push(t.elapsed().as_secs_f64() / *reps as f64);
        }
    }
    let sizes: Vec<SizeTiming> = cases
        .into_iter()
        .map(|(n, _, _, _, _, mut samples)| {
            samples.sort_by(f64::total_cmp);
            let m = samples.len();
            let median_s = if m % 2 == 1 { samples[m / 2] } else { 0.5 * (samples[m / 2 - 1] + samples[m / 2]) };
            SizeTiming { n_antennas: n, median_s, min_s: samples[0], mean_s: samples.iter().sum::<f64>() / m as f64 }
        })
        .collect();
    let ns: Vec<f64> = sizes.iter().map(|s| s.n_antennas as f64).collect();
    let ts: Vec<f64> = sizes.iter().map(|s| s.median_s).collect();
    let slope = loglog_slope(&ns, &ts)?;
    Ok(ScalingReport { window: cfg.scenario.window, sizes, slope })
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<ScalingReport> {
    ensure_dir(out)?;
    let report = compute(cfg)?;
    let hash = cfg.hash();
    let rows: Vec<Vec<String>> = report
        .sizes
        .iter()
        .map(|s| vec![s.n_antennas.to_string(), fmt(s.median_s), fmt(s.min_s), fmt(s.mean_s)])
        .collect();
    write_csv(&out.join("scaling.csv"), &hash, &["n_antennas", "median_s", "min_s", "mean_s"], &rows)?;
    write_json(&out.join("scaling_report.json"), &hash, &report)?;
    Ok(report)
}
