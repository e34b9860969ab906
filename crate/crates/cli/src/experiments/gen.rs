//! Evaluation dataset generation.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use blindsure_core::dataset::{record_bytes, write_record, DatasetRecord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{draw_trial, trial_rng};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json};

/// Refuse to write more than this without `--allow-large`.
pub const SIZE_LIMIT: u64 = 4 << 30;

pub const DATASET_FILE: &str = "dataset.ssc1";

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub file: String,
    pub records: usize,
    pub bytes: u64,
    pub sha256: String,
    pub seed: u64,
    pub config: String,
}

pub fn run(cfg: &ExperimentConfig, out: &Path, allow_large: bool) -> CliResult<Manifest> {
    let sc = &cfg.scenario;
    let trials = cfg.trials();
    let bytes = record_bytes(sc.n_antennas, sc.n_rf, sc.n_slots) * trials as u64;
    if bytes > SIZE_LIMIT && !allow_large {
        return Err(CliError::TooLarge { bytes, limit: SIZE_LIMIT });
    }
    ensure_dir(out)?;
    let path = out.join(DATASET_FILE);
    let mut w = BufWriter::new(File::create(&path)?);
    for k in 0..trials {
        let mut rng = trial_rng(sc.seed, k as u64);
        let t = draw_trial(sc, &mut rng)?;
        let rec = DatasetRecord {
            n_antennas: sc.n_antennas as u32,
            n_rf: sc.n_rf as u32,
            n_slots: sc.n_slots as u32,
            n_paths: sc.n_paths as u32,
            snr_db: sc.snr_db,
            seed: sc.seed,
            channel: t.channel.complex.into_inner(),
            matrix: t.ensemble.matrix,
            pilots: t.pilots.complex,
        };
        write_record(&mut w, &rec)?;
    }
    w.flush()?;
    drop(w);

    let mut hasher = Sha256::new();
    let mut f = File::open(&path)?;
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    let manifest = Manifest {
        file: DATASET_FILE.into(),
        records: trials,
        bytes,
        sha256: hex::encode(hasher.finalize()),
        seed: sc.seed,
        config: cfg.canonical(),
    };
    write_json(&out.join("manifest.json"), &cfg.hash(), &manifest)?;
    Ok(manifest)
}
