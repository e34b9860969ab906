//! Hybrid far/near-field channel synthesis on a uniform planar array.
//!
//! Antenna `n = row * side + col` sits at `(0, y_col, z_row)` with
//! coordinates centered on the array. A path arriving from azimuth `phi`
//! and elevation `theta` has unit direction
//! `(cos theta cos phi, cos theta sin phi, sin theta)`, so broadside is
//! `phi = theta = 0`. Far-field paths use planar phases; paths inside the
//! Rayleigh distance use exact spherical-wave phases referenced to the
//! array center. Both are unit modulus per entry.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::realify_vec;
use crate::oracle::Oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Far,
    Near,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Complex gain, with the carrier delay phase already folded in.
    pub gain: Complex64,
    pub azimuth: f64,
    pub elevation: f64,
    /// Source distance from the array center in meters.
    pub distance: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Ground-truth channel realization.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    /// `h~`, length N.
    pub complex: Oracle<Vec<Complex64>>,
    /// `h = [Re h~; Im h~]`, length 2N.
    pub real: Oracle<Vec<f64>>,
    pub paths: Oracle<PathSet>,
    /// `||h~||^2` after normalization; equals N by construction.
    pub energy: f64,
}

pub fn regime_for(distance: f64, config: &ScenarioConfig) -> Regime {
    if distance > config.rayleigh_distance() {
        Regime::Far
    } else {
        Regime::Near
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Draw `L` paths: path 0 is LoS, the rest NLoS.
pub fn sample_paths<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> PathSet {
    let (lo, hi) = config.distance_range;
    let paths = (0..config.n_paths)
        .map(|l| {
            let variance = if l == 0 { config.los_variance } else { config.nlos_variance };
            let gain = complex_normal(rng, variance);
            let azimuth = rng.random_range(-PI..PI);
            let elevation = rng.random_range(-PI / 2.0..PI / 2.0);
            let distance = if hi > lo { rng.random_range(lo..hi) } else { lo };
            Path { gain, azimuth, elevation, distance, regime: regime_for(distance, config) }
        })
        .collect();
    PathSet { paths }
}

/// Element coordinates `(y, z)` in meters, in antenna index order.
pub fn element_positions(config: &ScenarioConfig) -> Vec<(f64, f64)> {
    let side = config.side();
    let da = config.spacing();
    let center = (side as f64 - 1.0) / 2.0;
    (0..side)
        .flat_map(|row| (0..side).map(move |col| ((col as f64 - center) * da, (row as f64 - center) * da)))
        .collect()
}

/// Array response of one path, chosen by its regime flag.
pub fn array_response(path: &Path, config: &ScenarioConfig) -> Result<Vec<Complex64>> {
    if !(path.distance > 0.0) {
        return Err(Error::InvalidPath(format!("distance {} must be positive", path.distance)));
    }
    let k = 2.0 * PI / config.wavelength();
    let (sp, cp) = path.azimuth.sin_cos();
    let (st, ct) = path.elevation.sin_cos();
    let (ux, uy, uz) = (ct * cp, ct * sp, st);
    let positions = element_positions(config);
    let out = match path.regime {
        Regime::Far => positions
            .iter()
            .map(|&(y, z)| Complex64::from_polar(1.0, k * (uy * y + uz * z)))
            .collect(),
        Regime::Near => {
            let r = path.distance;
            positions
                .iter()
                .map(|&(y, z)| {
                    // r_n - r = (|e|^2 - 2 r u.e) / (r_n + r), stable for r >> |e|.
                    let ue = uy * y + uz * z;
                    let e2 = y * y + z * z;
                    let rn = ((r * ux).powi(2) + (r * uy - y).powi(2) + (r * uz - z).powi(2)).sqrt();
                    let delta = (e2 - 2.0 * r * ue) / (rn + r);
                    Complex64::from_polar(1.0, -k * delta)
                })
                .collect()
        }
    };
    Ok(out)
}

/// Superpose the paths and normalize so that `||h~||^2 = N`.
pub fn synth_channel(paths: &PathSet, config: &ScenarioConfig) -> Result<ChannelInstance> {
    if paths.is_empty() {
        return Err(Error::InvalidPath("empty path set".into()));
    }
    let n = config.n_antennas;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for p in &paths.paths {
        for (acc, a) in h.iter_mut().zip(array_response(p, config)?) {
            *acc += p.gain * a;
        }
    }
    let energy: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    let scale = (n as f64 / energy).sqrt();
    h.iter_mut().for_each(|z| *z *= scale);
    let energy = h.iter().map(|z| z.norm_sqr()).sum();
    let real = realify_vec(&h);
    Ok(ChannelInstance {
        complex: Oracle::new(h),
        real: Oracle::new(real),
        paths: Oracle::new(paths.clone()),
        energy,
    })
}

pub fn sample_channel<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<ChannelInstance> {
    synth_channel(&sample_paths(config, rng), config)
}
