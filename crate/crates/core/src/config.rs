//! Physical and algorithmic scenario parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// All parameters of one simulated uplink channel-estimation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Antenna count; the UPA is `sqrt(N) x sqrt(N)`.
    pub n_antennas: usize,
    /// RF chains; each one is wired to `N / N_RF` antennas.
    pub n_rf: usize,
    /// Pilot slots.
    pub n_slots: usize,
    /// Number of propagation paths (path 0 is LoS).
    pub n_paths: usize,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Antenna spacing in meters; `None` means half a wavelength.
    pub antenna_spacing: Option<f64>,
    /// Received SNR in dB, `SNR = 1 / sigma_n^2`. `+inf` disables noise.
    pub snr_db: f64,
    /// Path distance range in meters, sampled uniformly.
    pub distance_range: (f64, f64),
    /// Gain variance of the LoS path.
    pub los_variance: f64,
    /// Gain variance of every NLoS path.
    pub nlos_variance: f64,
    /// Virtual subarray area `d` used by the PCA noise estimator (a square number).
    pub window: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_antennas: 1024,
            n_rf: 4,
            n_slots: 128,
            n_paths: 3,
            carrier_hz: 14e9,
            antenna_spacing: None,
            snr_db: 15.0,
            distance_range: (5.0, 30.0),
            los_variance: 1.0,
            nlos_variance: 0.1,
            window: 25,
            seed: 0,
        }
    }
}

/// Integer square root, if `n` is a perfect square.
pub fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_antennas == 0 || exact_sqrt(self.n_antennas).is_none() {
            return bad(format!("N = {} is not a perfect square", self.n_antennas));
        }
        if self.n_rf == 0 || !self.n_antennas.is_multiple_of(self.n_rf) {
            return bad(format!("N_RF = {} does not divide N = {}", self.n_rf, self.n_antennas));
        }
        if self.n_slots == 0 {
            return bad("Q must be at least 1".into());
        }
        if self.n_paths == 0 {
            return bad("L must be at least 1".into());
        }
        if !(self.carrier_hz > 0.0) {
            return bad(format!("carrier frequency {} must be positive", self.carrier_hz));
        }
        if let Some(d) = self.antenna_spacing {
            if !(d > 0.0) {
                return bad(format!("antenna spacing {d} must be positive"));
            }
        }
        let (lo, hi) = self.distance_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad(format!("distance range ({lo}, {hi}) is invalid"));
        }
        if self.los_variance < 0.0 || self.nlos_variance < 0.0 {
            return bad("gain variances must be non-negative".into());
        }
        if self.snr_db.is_nan() {
            return bad("SNR is NaN".into());
        }
        match exact_sqrt(self.window) {
            Some(w) if w >= 1 && self.window < self.n_antennas => {}
            _ => {
                return bad(format!(
                    "window d = {} must be a square smaller than N = {}",
                    self.window, self.n_antennas
                ))
            }
        }
        Ok(())
    }

    /// Side length of the UPA.
    pub fn side(&self) -> usize {
        exact_sqrt(self.n_antennas).expect("validated config")
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn spacing(&self) -> f64 {
        self.antenna_spacing.unwrap_or(0.5 * self.wavelength())
    }

    /// Array aperture, taken as the UPA diagonal `sqrt(2) (sqrt(N) - 1) d_a`.
    pub fn aperture(&self) -> f64 {
        std::f64::consts::SQRT_2 * (self.side() as f64 - 1.0) * self.spacing()
    }

    /// Boundary between near and far field, `2 D^2 / lambda`.
    pub fn rayleigh_distance(&self) -> f64 {
        let d = self.aperture();
        2.0 * d * d / self.wavelength()
    }

    /// Complex noise variance `10^(-snr/10)`; zero when noise is disabled.
    pub fn noise_variance(&self) -> f64 {
        noise_variance_from_snr(self.snr_db)
    }

    /// Number of complex measurements `Q N_RF`.
    pub fn n_measurements(&self) -> usize {
        self.n_slots * self.n_rf
    }
}

/// `10^(-snr_db/10)`, with `+inf` dB mapping to exactly zero.
pub fn noise_variance_from_snr(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rayleigh_distance_is_about_twenty_meters() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        let dr = c.rayleigh_distance();
        assert!((19.0..22.0).contains(&dr), "D_Rayleigh = {dr}");
    }

    #[test]
    fn zero_db_is_unit_noise() {
        assert_eq!(noise_variance_from_snr(0.0), 1.0);
        assert_eq!(noise_variance_from_snr(f64::INFINITY), 0.0);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut c = ScenarioConfig { n_antennas: 1000, ..Default::default() };
        assert!(c.validate().is_err());
        c.n_antennas = 1024;
        c.n_rf = 3;
        assert!(c.validate().is_err());
        c.n_rf = 4;
        c.window = 24;
        assert!(c.validate().is_err());
        c.window = 1024;
        assert!(c.validate().is_err());
        c.window = 25;
        c.n_paths = 0;
        assert!(c.validate().is_err());
    }
}
