//! Per-iteration blind vs true NMSE on the OAMP pipeline.

use std::path::Path;

use blindsure_core::linalg::dist_sq;
use blindsure_core::recon::run_pipeline;
use blindsure_core::stats::{normality_stats, qq_max_deviation, qq_points};
use blindsure_core::sure::{nonblind_predict, sure_with, true_eval, McOptions};
use blindsure_core::{
    blind_scope, Algorithm, DecorrelatedLe, Denoiser, IterateState, PipelineOptions, Problem, SigmaSource,
    SurePrediction,
};
use rayon::prelude::*;
use serde::Serialize;

use super::{build_denoiser, db, draw_trial, trial_rng};
use crate::config::{ExperimentConfig, SigmaChoice};
use crate::error::CliResult;
use crate::output::{ensure_dir, fmt, write_csv, write_json, write_jsonl};

/// Central probability range for QQ deviations.
pub const QQ_COVERAGE: f64 = 0.98;
pub const QQ_LIMIT: f64 = 0.15;

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub trial: usize,
    pub t: usize,
    pub true_mse: f64,
    pub true_nmse_db: f64,
    pub sure: f64,
    pub blind_nmse_db: f64,
    pub nonblind_mse: f64,
    pub nonblind_nmse_db: f64,
    pub sigma2_e_hat: f64,
    pub sigma2_e_true: f64,
    pub pca_fallback: bool,
    pub negative_sure: bool,
    pub proxy_floored: bool,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub normality_pass: bool,
    /// Only filled at the configured QQ iterations.
    pub qq_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialTrace {
    pub records: Vec<IterationRecord>,
    /// Ground-truth reads made by the blind path.
    pub oracle_reads: u64,
    /// `r_t - h` at the QQ iterations, keyed by `t`.
    pub errors: Vec<(usize, Vec<f64>)>,
}

/// One OAMP trajectory: the blind part runs inside an audited scope, the
/// evaluation against ground truth happens afterwards.
pub fn run_trial(cfg: &ExperimentConfig, den: &dyn Denoiser, trial: usize) -> CliResult<TrialTrace> {
    let mut rng = trial_rng(cfg.scenario.seed, trial as u64);
    let data = draw_trial(&cfg.scenario, &mut rng)?;
    let m = &data.ensemble.real_matrix;
    let y = &data.pilots.real;
    let source = match cfg.sigma_source {
        SigmaChoice::Pca => SigmaSource::Pca { window: cfg.scenario.window },
        SigmaChoice::Oracle => SigmaSource::Oracle(&data.channel.real),
        SigmaChoice::Fixed(v) => SigmaSource::Fixed(v),
    };
    let tag = source.tag();
    let opts = PipelineOptions { iterations: cfg.iterations, probe_seed: cfg.scenario.seed };
    let mc = McOptions { probes: cfg.mc_probes, epsilon: None };
    let reported = den.output_stage().unwrap_or(den);

    let (blind, oracle_reads) = blind_scope(|| -> CliResult<(Vec<IterateState>, Vec<SurePrediction>)> {
        let problem = Problem { y, m };
        let le = DecorrelatedLe::from_complex(&data.ensemble.matrix, m)?;
        let mut preds = Vec::with_capacity(cfg.iterations);
        let mut observe = |s: &IterateState| {
            let p = sure_with(reported, &s.r_t, Some(&s.estimate), s.sigma2_e_hat, cfg.divergence, &mc, &mut rng, tag)?;
            preds.push(p);
            Ok(())
        };
        let states = run_pipeline(&problem, &Algorithm::Oamp(le), den, &source, &opts, &mut [&mut observe])?;
        Ok((states, preds))
    });
    let (states, preds) = blind?;

    let h = data.channel.real.reveal();
    let sigma2_n = *data.pilots.noise_variance.reveal();
    let mut records = Vec::with_capacity(states.len());
    let mut errors = Vec::new();
    for (s, p) in states.iter().zip(&preds) {
        let truth = true_eval(&s.estimate, h)?;
        let nonblind = nonblind_predict(y, m, &s.estimate, sigma2_n, cfg.nonblind_floor)?;
        let e: Vec<f64> = s.r_t.iter().zip(h).map(|(a, b)| a - b).collect();
        let normal = normality_stats(&e)?;
        let qq_deviation = if cfg.qq_iterations.contains(&s.t) {
            errors.push((s.t, e.clone()));
            Some(qq_max_deviation(&qq_points(&e)?, QQ_COVERAGE))
        } else {
            None
        };
        records.push(IterationRecord {
            trial,
            t: s.t,
            true_mse: truth.true_mse,
            true_nmse_db: db(truth.true_nmse),
            sure: p.sure,
            blind_nmse_db: db(p.predicted_nmse),
            nonblind_mse: nonblind,
            nonblind_nmse_db: db(nonblind / p.proxy_power),
            sigma2_e_hat: s.sigma2_e_hat,
            sigma2_e_true: dist_sq(&s.r_t, h) / h.len() as f64,
            pca_fallback: s.noise.as_ref().is_some_and(|n| n.fallback),
            negative_sure: p.negative,
            proxy_floored: p.proxy_floored,
            skewness: normal.skewness,
            excess_kurtosis: normal.excess_kurtosis,
            normality_pass: normal.pass,
            qq_deviation,
        });
    }
    Ok(TrialTrace { records, oracle_reads, errors })
}

/// Run `trials` trajectories; results are ordered by trial index.
pub fn run_trials(cfg: &ExperimentConfig, den: &dyn Denoiser) -> CliResult<Vec<TrialTrace>> {
    (0..cfg.trials()).into_par_iter().map(|k| run_trial(cfg, den, k)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationSummary {
    pub t: usize,
    pub true_nmse_db: f64,
    pub blind_nmse_db: f64,
    pub nonblind_nmse_db: f64,
    pub sigma2_e_hat: f64,
    pub sigma2_e_true: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackingReport {
    pub trials: usize,
    pub denoiser: String,
    pub per_iteration: Vec<IterationSummary>,
    /// Largest `|mean blind dB - mean true dB|` over `t >= 2`.
    pub max_blind_gap_db: f64,
    /// Fraction of trials where the non-blind final-iterate error exceeds SURE's.
    pub nonblind_worse_fraction: f64,
    pub oracle_reads_in_blind_path: u64,
    pub pca_fallbacks: usize,
    pub negative_sure: usize,
}

pub fn summarize(cfg: &ExperimentConfig, traces: &[TrialTrace]) -> TrackingReport {
    let n = traces.len() as f64;
    let mut per_iteration = Vec::with_capacity(cfg.iterations);
    for k in 0..cfg.iterations {
        let mean = |f: &dyn Fn(&IterationRecord) -> f64| traces.iter().map(|tr| f(&tr.records[k])).sum::<f64>() / n;
        per_iteration.push(IterationSummary {
            t: k + 1,
            true_nmse_db: mean(&|r| r.true_nmse_db),
            blind_nmse_db: mean(&|r| r.blind_nmse_db),
            nonblind_nmse_db: mean(&|r| r.nonblind_nmse_db),
            sigma2_e_hat: mean(&|r| r.sigma2_e_hat),
            sigma2_e_true: mean(&|r| r.sigma2_e_true),
        });
    }
    let max_blind_gap_db = per_iteration
        .iter()
        .filter(|s| s.t >= 2)
        .map(|s| (s.blind_nmse_db - s.true_nmse_db).abs())
        .fold(0.0, f64::max);
    let worse = traces
        .iter()
        .filter(|tr| {
            let last = tr.records.last().expect("at least one iteration");
            (last.nonblind_mse - last.true_mse).abs() > (last.sure - last.true_mse).abs()
        })
        .count();
    let all = || traces.iter().flat_map(|t| t.records.iter());
    TrackingReport {
        trials: traces.len(),
        denoiser: cfg.denoiser.to_string(),
        per_iteration,
        max_blind_gap_db,
        nonblind_worse_fraction: worse as f64 / n,
        oracle_reads_in_blind_path: traces.iter().map(|t| t.oracle_reads).sum(),
        pca_fallbacks: all().filter(|r| r.pca_fallback).count(),
        negative_sure: all().filter(|r| r.negative_sure).count(),
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<TrackingReport> {
    ensure_dir(out)?;
    let den = build_denoiser(cfg)?;
    let traces = run_trials(cfg, den.as_ref())?;
    let report = summarize(cfg, &traces);
    let hash = cfg.hash();
    let records: Vec<&IterationRecord> = traces.iter().flat_map(|t| t.records.iter()).collect();
    write_jsonl(&out.join("tracking.jsonl"), &hash, &records)?;
    let rows: Vec<Vec<String>> = report
        .per_iteration
        .iter()
        .map(|s| {
            vec![
                s.t.to_string(),
                fmt(s.true_nmse_db),
                fmt(s.blind_nmse_db),
                fmt(s.nonblind_nmse_db),
                fmt(s.sigma2_e_hat),
                fmt(s.sigma2_e_true),
            ]
        })
        .collect();
    write_csv(
        &out.join("tracking_summary.csv"),
        &hash,
        &["t", "true_nmse_db", "blind_nmse_db", "nonblind_nmse_db", "sigma2_e_hat", "sigma2_e_true"],
        &rows,
    )?;
    write_json(&out.join("tracking_report.json"), &hash, &report)?;
    Ok(report)
}
