//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error. The canonical rendering (every key, fixed order) is hashed with
//! SHA-256 and embedded in every output file.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use blindsure_core::sure::DivergenceMode;
use blindsure_core::{DenoiserSpec, ScenarioConfig};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Gen,
    NoiseTable,
    Tracking,
    Diagnostics,
    Scaling,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Gen => "gen",
            ExperimentKind::NoiseTable => "noise-table",
            ExperimentKind::Tracking => "tracking",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::Scaling => "scaling",
        }
    }

    pub fn default_trials(&self) -> usize {
        match self {
            ExperimentKind::Gen => 5000,
            ExperimentKind::NoiseTable => 500,
            ExperimentKind::Tracking => 100,
            ExperimentKind::Diagnostics => 100,
            ExperimentKind::Scaling => 20,
        }
    }
}

/// Where the pipeline takes its per-iteration error variance from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Pca,
    Oracle,
    /// Fixed per-real-component variance.
    Fixed(f64),
}

impl FromStr for SigmaChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim() {
            "pca" => Ok(SigmaChoice::Pca),
            "oracle" => Ok(SigmaChoice::Oracle),
            other => match other.strip_prefix("fixed:").map(|v| v.parse::<f64>()) {
                Some(Ok(v)) if v >= 0.0 => Ok(SigmaChoice::Fixed(v)),
                _ => Err(CliError::Config(format!("sigma_source `{other}` is not pca, oracle or fixed:V"))),
            },
        }
    }
}

impl std::fmt::Display for SigmaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmaChoice::Pca => write!(f, "pca"),
            SigmaChoice::Oracle => write!(f, "oracle"),
            SigmaChoice::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub kind: ExperimentKind,
    /// `None` means the per-experiment default.
    pub trials: Option<usize>,
    pub denoiser: DenoiserSpec,
    pub sigma_source: SigmaChoice,
    pub divergence: DivergenceMode,
    pub mc_probes: usize,
    pub iterations: usize,
    pub nonblind_floor: f64,
    pub snr_list: Vec<f64>,
    pub qq_iterations: Vec<usize>,
    pub eigen_snr_db: f64,
    pub sizes: Vec<usize>,
    pub external_timeout_s: f64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            kind,
            trials: None,
            denoiser: "df(soft:1.5:angular)".parse().expect("valid default"),
            sigma_source: SigmaChoice::Pca,
            divergence: DivergenceMode::Analytic,
            mc_probes: 1,
            iterations: 15,
            nonblind_floor: 0.001,
            snr_list: vec![5.0, 15.0, 25.0],
            qq_iterations: vec![5, 10],
            eigen_snr_db: 0.0,
            sizes: vec![256, 1024, 4096],
            external_timeout_s: 10.0,
        }
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.kind.default_trials())
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, kind)
    }

    pub fn parse(text: &str, kind: ExperimentKind) -> CliResult<Self> {
        let mut cfg = Self::new(kind);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
            v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>> {
            v.split(',').map(|p| num(key, p.trim())).collect()
        }
        let s = &mut self.scenario;
        match key {
            "experiment" => {
                if value != self.kind.name() {
                    return Err(CliError::Config(format!(
                        "config is for `{value}`, not `{}`",
                        self.kind.name()
                    )));
                }
            }
            "n_antennas" => s.n_antennas = num(key, value)?,
            "n_rf" => s.n_rf = num(key, value)?,
            "n_slots" => s.n_slots = num(key, value)?,
            "n_paths" => s.n_paths = num(key, value)?,
            "carrier_hz" => s.carrier_hz = num(key, value)?,
            "antenna_spacing" => {
                s.antenna_spacing = if value == "auto" { None } else { Some(num(key, value)?) }
            }
            "snr_db" => s.snr_db = num(key, value)?,
            "distance_min" => s.distance_range.0 = num(key, value)?,
            "distance_max" => s.distance_range.1 = num(key, value)?,
            "los_variance" => s.los_variance = num(key, value)?,
            "nlos_variance" => s.nlos_variance = num(key, value)?,
            "window" => s.window = num(key, value)?,
            "seed" => s.seed = num(key, value)?,
            "trials" => self.trials = Some(num(key, value)?),
            "denoiser" => {
                self.denoiser = value.parse().map_err(|e| CliError::Config(format!("denoiser: {e}")))?
            }
            "sigma_source" => self.sigma_source = value.parse()?,
            "divergence" => {
                self.divergence = match value {
                    "analytic" => DivergenceMode::Analytic,
                    "mc" => DivergenceMode::Mc,
                    _ => return Err(CliError::Config(format!("divergence `{value}` is not analytic or mc"))),
                }
            }
            "mc_probes" => self.mc_probes = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "nonblind_floor" => self.nonblind_floor = num(key, value)?,
            "snr_list" => self.snr_list = list(key, value)?,
            "qq_iterations" => self.qq_iterations = list(key, value)?,
            "eigen_snr_db" => self.eigen_snr_db = num(key, value)?,
            "sizes" => self.sizes = list(key, value)?,
            "external_timeout_s" => self.external_timeout_s = num(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.scenario.validate()?;
        if self.iterations == 0 {
            return Err(CliError::Config("iterations must be at least 1".into()));
        }
        if self.mc_probes == 0 {
            return Err(CliError::Config("mc_probes must be at least 1".into()));
        }
        if self.trials == Some(0) {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.qq_iterations.iter().any(|&t| t == 0 || t > self.iterations) {
            return Err(CliError::Config("qq_iterations must lie in 1..=iterations".into()));
        }
        if self.external_timeout_s.is_nan() || self.external_timeout_s <= 0.0 {
            return Err(CliError::Config("external_timeout_s must be positive".into()));
        }
        Ok(())
    }

    /// Every key in a fixed order; parsing it back yields the same config.
    pub fn canonical(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let s = &self.scenario;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("experiment", self.kind.name().into());
        kv("n_antennas", s.n_antennas.to_string());
        kv("n_rf", s.n_rf.to_string());
        kv("n_slots", s.n_slots.to_string());
        kv("n_paths", s.n_paths.to_string());
        kv("carrier_hz", s.carrier_hz.to_string());
        kv("antenna_spacing", s.antenna_spacing.map_or("auto".into(), |v| v.to_string()));
        kv("snr_db", s.snr_db.to_string());
        kv("distance_min", s.distance_range.0.to_string());
        kv("distance_max", s.distance_range.1.to_string());
        kv("los_variance", s.los_variance.to_string());
        kv("nlos_variance", s.nlos_variance.to_string());
        kv("window", s.window.to_string());
        kv("seed", s.seed.to_string());
        kv("trials", self.trials().to_string());
        kv("denoiser", self.denoiser.to_string());
        kv("sigma_source", self.sigma_source.to_string());
        kv(
            "divergence",
            match self.divergence {
                DivergenceMode::Analytic => "analytic".into(),
                DivergenceMode::Mc => "mc".into(),
            },
        );
        kv("mc_probes", self.mc_probes.to_string());
        kv("iterations", self.iterations.to_string());
        kv("nonblind_floor", self.nonblind_floor.to_string());
        kv("snr_list", join(&self.snr_list));
        kv("qq_iterations", join(&self.qq_iterations));
        kv("eigen_snr_db", self.eigen_snr_db.to_string());
        kv("sizes", join(&self.sizes));
        kv("external_timeout_s", self.external_timeout_s.to_string());
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
