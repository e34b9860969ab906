//! Fixtures shared by the benchmarks.

use blindsure_core::config::noise_variance_from_snr;
use blindsure_core::field::sample_channel;
use blindsure_core::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Real-stacked channel of `n` antennas plus white noise at `snr_db`.
pub fn noisy_channel(n: usize, snr_db: f64, seed: u64) -> Vec<f64> {
    let cfg = ScenarioConfig { n_antennas: n, snr_db, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = sample_channel(&cfg, &mut rng).expect("valid scenario").real.into_inner();
    let s = (noise_variance_from_snr(snr_db) / 2.0).sqrt();
    h.iter().map(|x| x + s * rng.sample::<f64, _>(StandardNormal)).collect()
}
