//! Experiment drivers. Each returns a typed report and writes its files
//! into the output directory.

pub mod diagnostics;
pub mod gen;
pub mod noise_table;
pub mod scaling;
pub mod tracking;

use std::time::Duration;

use blindsure_core::field::sample_channel;
use blindsure_core::measurement::{build_measurement, simulate_pilots};
use blindsure_core::{ChannelInstance, Denoiser, Error as CoreError, MeasurementEnsemble, Pilots, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::protocol::ExternalDenoiser;

/// Independent stream for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Stream offset separating auxiliary draws from the main trial stream.
pub const AUX_STREAM: u64 = 1 << 40;

pub struct Trial {
    pub channel: ChannelInstance,
    pub ensemble: MeasurementEnsemble,
    pub pilots: Pilots,
}

const COMBINER_RETRIES: usize = 8;

/// Channel, combiners (redrawn on a degenerate Gram) and noisy pilots.
pub fn draw_trial(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> CliResult<Trial> {
    let channel = sample_channel(cfg, rng)?;
    let mut attempt = 0;
    let ensemble = loop {
        match build_measurement(cfg, rng) {
            Ok(e) => break e,
            Err(CoreError::CombinerDegenerate { .. }) if attempt + 1 < COMBINER_RETRIES => attempt += 1,
            Err(e) => return Err(e.into()),
        }
    };
    let pilots = simulate_pilots(&channel, &ensemble, cfg.snr_db, rng)?;
    Ok(Trial { channel, ensemble, pilots })
}

/// Build the configured denoiser, spawning external endpoints as needed.
pub fn build_denoiser(cfg: &ExperimentConfig) -> CliResult<Box<dyn Denoiser>> {
    let timeout = Duration::from_secs_f64(cfg.external_timeout_s);
    Ok(cfg.denoiser.build_with(&mut |cmd| {
        let ext = ExternalDenoiser::spawn(cmd, timeout).map_err(|e| CoreError::Denoiser(Box::new(e)))?;
        Ok(Box::new(ext) as Box<dyn Denoiser>)
    })?)
}

/// `10 log10(x)` with a display floor of -90 dB.
pub fn db(x: f64) -> f64 {
    10.0 * x.max(1e-9).log10()
}
