//! QQ data of the NLE input error, covariance eigen-spectra and channel heatmaps.

use std::path::Path;

use blindsure_core::config::{exact_sqrt, noise_variance_from_snr};
use blindsure_core::field::sample_channel;
use blindsure_core::noise::{split_tail, vsc_spectrum};
use blindsure_core::stats::qq_points;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::tracking::{run_trials, QQ_LIMIT};
use super::{build_denoiser, trial_rng, AUX_STREAM};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{ensure_dir, fmt, write_csv, write_json};

/// Eigen-structure of one clean/noisy channel pair.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumPair {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    /// Median of the noise tail picked by the split on the noisy spectrum.
    pub tail_median: f64,
    /// Clean eigenvalues above ten times `tail_median`.
    pub clean_above: usize,
    /// `tail_median / (sigma^2 / 2)`.
    pub tail_ratio: f64,
}

pub fn spectrum_pair(cfg: &ExperimentConfig, trial: usize) -> CliResult<(SpectrumPair, Vec<f64>, Vec<f64>)> {
    let mut rng = trial_rng(cfg.scenario.seed, AUX_STREAM + trial as u64);
    let channel = sample_channel(&cfg.scenario, &mut rng)?;
    let h = channel.real.reveal().clone();
    let sigma2 = noise_variance_from_snr(cfg.eigen_snr_db);
    let s = (sigma2 / 2.0).sqrt();
    let noisy: Vec<f64> = h.iter().map(|x| x + s * rng.sample::<f64, _>(StandardNormal)).collect();
    let d = cfg.scenario.window;
    let clean = vsc_spectrum(&h, d)?;
    let noisy_ev = vsc_spectrum(&noisy, d)?;
    let side = cfg.scenario.side();
    let w = exact_sqrt(d).expect("validated window");
    let windows = (side - w + 1).pow(2);
    let split = split_tail(&noisy_ev, windows)?;
    let tail = &noisy_ev[split.index..];
    let tail_median = blindsure_core::noise::median(tail);
    let clean_above = clean.iter().filter(|&&v| v > 10.0 * tail_median).count();
    let pair = SpectrumPair { clean, noisy: noisy_ev, tail_median, clean_above, tail_ratio: tail_median / (sigma2 / 2.0) };
    Ok((pair, h, noisy))
}

#[derive(Debug, Clone, Serialize)]
pub struct QqSummary {
    pub t: usize,
    /// Trials passing the moment normality gate.
    pub normality_pass: usize,
    /// Trials with central-range QQ deviation below the limit.
    pub qq_pass: usize,
    /// Trials passing both.
    pub both_pass: usize,
    pub mean_qq_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub trials: usize,
    pub qq: Vec<QqSummary>,
    /// Trials whose clean spectrum has at most `2L` eigenvalues above ten times the tail median.
    pub clean_rank_pass: usize,
    pub max_clean_above: usize,
    /// Trials whose noisy tail median lies within 20% of `sigma^2 / 2`.
    pub tail_pass: usize,
    pub worst_tail_ratio: f64,
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<DiagnosticsReport> {
    ensure_dir(out)?;
    let hash = cfg.hash();
    let den = build_denoiser(cfg)?;
    let traces = run_trials(cfg, den.as_ref())?;
    let trials = traces.len();

    let mut qq = Vec::new();
    for &t in &cfg.qq_iterations {
        let recs: Vec<_> = traces.iter().map(|tr| &tr.records[t - 1]).collect();
        let dev: Vec<f64> = recs.iter().map(|r| r.qq_deviation.expect("qq iteration")).collect();
        qq.push(QqSummary {
            t,
            normality_pass: recs.iter().filter(|r| r.normality_pass).count(),
            qq_pass: dev.iter().filter(|&&d| d < QQ_LIMIT).count(),
            both_pass: recs.iter().zip(&dev).filter(|(r, &d)| r.normality_pass && d < QQ_LIMIT).count(),
            mean_qq_deviation: dev.iter().sum::<f64>() / dev.len() as f64,
        });
        if let Some((_, e)) = traces[0].errors.iter().find(|(k, _)| *k == t) {
            let rows: Vec<Vec<String>> = qq_points(e)?
                .iter()
                .map(|p| vec![fmt(p.p), fmt(p.theoretical), fmt(p.sample)])
                .collect();
            write_csv(&out.join(format!("qq_t{t}.csv")), &hash, &["p", "theoretical", "sample"], &rows)?;
        }
    }

    let pairs: Vec<(SpectrumPair, Vec<f64>, Vec<f64>)> =
        (0..trials).into_par_iter().map(|k| spectrum_pair(cfg, k)).collect::<CliResult<_>>()?;
    let limit = 2 * cfg.scenario.n_paths;
    let report = DiagnosticsReport {
        trials,
        qq,
        clean_rank_pass: pairs.iter().filter(|p| p.0.clean_above <= limit).count(),
        max_clean_above: pairs.iter().map(|p| p.0.clean_above).max().unwrap_or(0),
        tail_pass: pairs.iter().filter(|p| (p.0.tail_ratio - 1.0).abs() <= 0.2).count(),
        worst_tail_ratio: pairs
            .iter()
            .map(|p| p.0.tail_ratio)
            .fold(1.0, |w, r| if (r - 1.0).abs() > (w - 1.0).abs() { r } else { w }),
    };

    let (first, h, noisy) = &pairs[0];
    let reference = noise_variance_from_snr(cfg.eigen_snr_db) / 2.0;
    let rows: Vec<Vec<String>> = first
        .clean
        .iter()
        .zip(&first.noisy)
        .enumerate()
        .map(|(i, (c, n))| vec![(i + 1).to_string(), fmt(*c), fmt(*n), fmt(reference)])
        .collect();
    write_csv(&out.join("eigenspectrum.csv"), &hash, &["index", "clean", "noisy", "noise_reference"], &rows)?;
    let side = cfg.scenario.side();
    for (name, v) in [("heatmap_clean.csv", h), ("heatmap_noisy.csv", noisy)] {
        let rows: Vec<Vec<String>> = (0..side).map(|r| (0..side).map(|c| fmt(v[r * side + c])).collect()).collect();
        let header: Vec<String> = (0..side).map(|c| format!("c{c}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&out.join(name), &hash, &header, &rows)?;
    }
    write_json(&out.join("diagnostics_report.json"), &hash, &report)?;
    Ok(report)
}
