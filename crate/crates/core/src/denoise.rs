//! Denoisers used as the non-linear stage of AMP/OAMP.
//!
//! Every denoiser takes the real-stacked pseudo-observation `r` and the
//! per-real-component noise standard deviation `sigma`. Divergences are
//! reported as the unnormalized sum `sum_i d eta_i / d r_i`; callers that
//! need the normalized form divide by `r.len()`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::linalg::{complexify_vec, norm_sq, realify_vec};

pub trait Denoiser: Send + Sync + fmt::Debug {
    fn denoise(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>>;

    /// Closed-form unnormalized divergence at `r`, or `None` if only a
    /// Monte-Carlo estimate is possible.
    fn divergence(&self, r: &[f64], sigma: f64) -> Result<Option<f64>>;

    /// `r . grad_r(divergence)`, needed to differentiate divergence-free
    /// wrappers in closed form. `None` when unknown.
    fn divergence_radial(&self, _r: &[f64], _sigma: f64) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Denoiser whose output is the reported channel estimate, when it
    /// differs from the one that drives the iteration.
    fn output_stage(&self) -> Option<&dyn Denoiser> {
        None
    }

    fn label(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Identity;

impl Denoiser for Identity {
    fn denoise(&self, r: &[f64], _sigma: f64) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }

    fn divergence(&self, r: &[f64], _sigma: f64) -> Result<Option<f64>> {
        Ok(Some(r.len() as f64))
    }

    fn divergence_radial(&self, _r: &[f64], _sigma: f64) -> Result<Option<f64>> {
        Ok(Some(0.0))
    }

    fn label(&self) -> String {
        "identity".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// Absolute threshold.
    Fixed(f64),
    /// Threshold `c * sigma`.
    Scaled(f64),
}

impl Threshold {
    pub fn resolve(&self, sigma: f64) -> f64 {
        match *self {
            Threshold::Fixed(l) => l,
            Threshold::Scaled(c) => c * sigma,
        }
    }
}

/// Where a coordinate-wise rule is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Directly on the entries of `r`.
    #[default]
    Spatial,
    /// On the real and imaginary parts of the unitary 2-D DFT of the
    /// complex channel grid encoded by `r`.
    Angular,
}

fn to_angular(r: &[f64]) -> Result<Vec<f64>> {
    let mut z = complexify_vec(r);
    dft::forward(&mut z)?;
    Ok(realify_vec(&z))
}

fn from_angular(c: &[f64]) -> Result<Vec<f64>> {
    let mut z = complexify_vec(c);
    dft::inverse(&mut z)?;
    Ok(realify_vec(&z))
}

pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

/// `sign(x) max(|x| - lambda, 0)` applied per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftThreshold {
    pub threshold: Threshold,
    pub domain: Domain,
}

impl Default for SoftThreshold {
    fn default() -> Self {
        Self { threshold: Threshold::Scaled(1.5), domain: Domain::Spatial }
    }
}

impl SoftThreshold {
    fn coefficients(&self, r: &[f64]) -> Result<Vec<f64>> {
        match self.domain {
            Domain::Spatial => Ok(r.to_vec()),
            Domain::Angular => to_angular(r),
        }
    }
}

impl Denoiser for SoftThreshold {
    fn denoise(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let lambda = self.threshold.resolve(sigma);
        let shrunk: Vec<f64> = self.coefficients(r)?.iter().map(|&x| soft_threshold(x, lambda)).collect();
        match self.domain {
            Domain::Spatial => Ok(shrunk),
            Domain::Angular => from_angular(&shrunk),
        }
    }

    /// Number of coefficients that survive the threshold (the transform is orthogonal).
    fn divergence(&self, r: &[f64], sigma: f64) -> Result<Option<f64>> {
        let lambda = self.threshold.resolve(sigma);
        let count = self.coefficients(r)?.iter().filter(|x| x.abs() > lambda).count();
        Ok(Some(count as f64))
    }

    fn divergence_radial(&self, _r: &[f64], _sigma: f64) -> Result<Option<f64>> {
        // the survivor count is piecewise constant in r
        Ok(Some(0.0))
    }

    fn label(&self) -> String {
        let t = match self.threshold {
            Threshold::Fixed(l) => format!("soft-fixed:{l}"),
            Threshold::Scaled(c) => format!("soft:{c}"),
        };
        match self.domain {
            Domain::Spatial => t,
            Domain::Angular => format!("{t}:angular"),
        }
    }
}

/// Wiener-style scalar shrinkage `g r` with `g = P / (P + sigma^2)` and the
/// signal power estimated as `P = max(||r||^2 / 2N - sigma^2, floor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearShrink {
    pub power_floor: f64,
}

impl Default for LinearShrink {
    fn default() -> Self {
        Self { power_floor: 1e-12 }
    }
}

impl LinearShrink {
    /// Returns the gain and whether the power floor was active.
    pub fn gain(&self, r: &[f64], sigma: f64) -> (f64, bool) {
        let s2 = sigma * sigma;
        let raw = norm_sq(r) / r.len() as f64 - s2;
        let floored = raw <= self.power_floor;
        let p = if floored { self.power_floor } else { raw };
        (p / (p + s2), floored)
    }
}

impl Denoiser for LinearShrink {
    fn denoise(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let (g, _) = self.gain(r, sigma);
        Ok(r.iter().map(|x| g * x).collect())
    }

    /// Exact divergence, including the dependence of the gain on `||r||`:
    /// with `g = 1 - 2N sigma^2 / ||r||^2` it is `2N g + 2 (1 - g)`.
    fn divergence(&self, r: &[f64], sigma: f64) -> Result<Option<f64>> {
        let n = r.len() as f64;
        let (g, floored) = self.gain(r, sigma);
        Ok(Some(if floored { n * g } else { n * g + 2.0 * (1.0 - g) }))
    }

    fn divergence_radial(&self, r: &[f64], sigma: f64) -> Result<Option<f64>> {
        let n = r.len() as f64;
        let (g, floored) = self.gain(r, sigma);
        // r . grad(g) = 2 (1 - g) while unfloored
        Ok(Some(if floored { 0.0 } else { (n - 2.0) * 2.0 * (1.0 - g) }))
    }

    fn label(&self) -> String {
        "shrink".into()
    }
}

/// `eta_df(r) = C (eta(r) - div(r) r)` with `div` the normalized divergence
/// of the inner denoiser.
#[derive(Debug)]
pub struct DivergenceFree {
    pub inner: Box<dyn Denoiser>,
    pub scale: f64,
    /// Seed of the fixed probe used when the inner denoiser has no closed-form divergence.
    pub probe_seed: u64,
}

impl DivergenceFree {
    pub fn new(inner: Box<dyn Denoiser>) -> Self {
        Self { inner, scale: 1.0, probe_seed: 0x5eed }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn inner_divergence(&self, r: &[f64], sigma: f64) -> Result<f64> {
        if let Some(d) = self.inner.divergence(r, sigma)? {
            return Ok(d);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.probe_seed);
        let est = crate::sure::mc_divergence(
            self.inner.as_ref(),
            r,
            sigma,
            &mut rng,
            &crate::sure::McOptions::default(),
        )?;
        Ok(est.divergence)
    }
}

impl Denoiser for DivergenceFree {
    fn denoise(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let eta = self.inner.denoise(r, sigma)?;
        let div = self.inner_divergence(r, sigma)? / r.len() as f64;
        Ok(eta.iter().zip(r).map(|(e, x)| self.scale * (e - div * x)).collect())
    }

    /// `-C r.grad(div) / 2N`, which vanishes for piecewise-constant inner divergences.
    fn divergence(&self, r: &[f64], sigma: f64) -> Result<Option<f64>> {
        Ok(self.inner.divergence_radial(r, sigma)?.map(|rad| -self.scale * rad / r.len() as f64))
    }

    fn output_stage(&self) -> Option<&dyn Denoiser> {
        Some(self.inner.as_ref())
    }

    fn label(&self) -> String {
        if self.scale == 1.0 {
            format!("df({})", self.inner.label())
        } else {
            format!("df({};C={})", self.inner.label(), self.scale)
        }
    }
}

pub fn divergence_free_wrap(inner: Box<dyn Denoiser>, scale: f64) -> DivergenceFree {
    DivergenceFree::new(inner).with_scale(scale)
}

/// Serializable description of a denoiser.
///
/// Text form: `identity`, `soft:C[:angular]`, `soft-fixed:L[:angular]`,
/// `shrink[:FLOOR]`, `df(INNER)` or `df(INNER;C=SCALE)`, `external:COMMAND`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DenoiserSpec {
    Identity,
    SoftThreshold { threshold: Threshold, domain: Domain },
    LinearShrink { power_floor: f64 },
    DivergenceFree { inner: Box<DenoiserSpec>, scale: f64 },
    /// Child process speaking the external denoiser protocol.
    External { command: String },
}

impl DenoiserSpec {
    /// Whether the denoiser has a closed-form divergence (otherwise MC only).
    pub fn has_analytic_divergence(&self) -> bool {
        match self {
            DenoiserSpec::External { .. } => false,
            DenoiserSpec::DivergenceFree { inner, .. } => inner.has_analytic_divergence(),
            _ => true,
        }
    }

    /// Instantiate, delegating external endpoints to `external`.
    pub fn build_with(
        &self,
        external: &mut dyn FnMut(&str) -> Result<Box<dyn Denoiser>>,
    ) -> Result<Box<dyn Denoiser>> {
        Ok(match self {
            DenoiserSpec::Identity => Box::new(Identity),
            DenoiserSpec::SoftThreshold { threshold, domain } => {
                Box::new(SoftThreshold { threshold: *threshold, domain: *domain })
            }
            DenoiserSpec::LinearShrink { power_floor } => Box::new(LinearShrink { power_floor: *power_floor }),
            DenoiserSpec::DivergenceFree { inner, scale } => {
                Box::new(divergence_free_wrap(inner.build_with(external)?, *scale))
            }
            DenoiserSpec::External { command } => external(command)?,
        })
    }

    /// Instantiate closed-form denoisers; external endpoints are an error here.
    pub fn build(&self) -> Result<Box<dyn Denoiser>> {
        self.build_with(&mut |cmd| {
            Err(Error::InvalidConfig(format!("external denoiser `{cmd}` needs a protocol client")))
        })
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserSpec::Identity => write!(f, "identity"),
            DenoiserSpec::SoftThreshold { threshold, domain } => {
                let d = SoftThreshold { threshold: *threshold, domain: *domain };
                write!(f, "{}", d.label())
            }
            DenoiserSpec::LinearShrink { power_floor } => {
                if *power_floor == LinearShrink::default().power_floor {
                    write!(f, "shrink")
                } else {
                    write!(f, "shrink:{power_floor}")
                }
            }
            DenoiserSpec::DivergenceFree { inner, scale } => {
                if *scale == 1.0 {
                    write!(f, "df({inner})")
                } else {
                    write!(f, "df({inner};C={scale})")
                }
            }
            DenoiserSpec::External { command } => write!(f, "external:{command}"),
        }
    }
}

impl FromStr for DenoiserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("unrecognized denoiser `{s}`"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        if s == "identity" {
            return Ok(DenoiserSpec::Identity);
        }
        if let Some(cmd) = s.strip_prefix("external:") {
            return Ok(DenoiserSpec::External { command: cmd.trim().to_string() });
        }
        if let Some(body) = s.strip_prefix("df(").and_then(|b| b.strip_suffix(')')) {
            let (inner, scale) = match body.rsplit_once(";C=") {
                Some((i, c)) => (i, num(c)?),
                None => (body, 1.0),
            };
            return Ok(DenoiserSpec::DivergenceFree { inner: Box::new(inner.parse()?), scale });
        }
        if s == "shrink" {
            return Ok(DenoiserSpec::LinearShrink { power_floor: LinearShrink::default().power_floor });
        }
        if let Some(v) = s.strip_prefix("shrink:") {
            return Ok(DenoiserSpec::LinearShrink { power_floor: num(v)? });
        }
        let (head, domain) = match s.strip_suffix(":angular") {
            Some(h) => (h, Domain::Angular),
            None => (s, Domain::Spatial),
        };
        if let Some(v) = head.strip_prefix("soft-fixed:") {
            return Ok(DenoiserSpec::SoftThreshold { threshold: Threshold::Fixed(num(v)?), domain });
        }
        if let Some(v) = head.strip_prefix("soft:") {
            return Ok(DenoiserSpec::SoftThreshold { threshold: Threshold::Scaled(num(v)?), domain });
        }
        if head == "soft" {
            return Ok(DenoiserSpec::SoftThreshold { threshold: Threshold::Scaled(1.5), domain });
        }
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_hand_example() {
        let d = SoftThreshold { threshold: Threshold::Fixed(1.0), domain: Domain::Spatial };
        let r = [2.0, -0.5, -3.0];
        assert_eq!(d.denoise(&r, 1.0).unwrap(), vec![1.0, 0.0, -2.0]);
        assert_eq!(d.divergence(&r, 1.0).unwrap(), Some(2.0));
    }

    #[test]
    fn shrink_gain_is_half_at_double_noise_power() {
        let sigma = 0.5f64;
        // ||r||^2 / 2N = 2 sigma^2
        let r = vec![(2.0f64).sqrt() * sigma; 8];
        let (g, floored) = LinearShrink::default().gain(&r, sigma);
        assert!(!floored);
        assert!((g - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shrink_floor_engages_below_noise() {
        let r = vec![0.1; 8];
        let (g, floored) = LinearShrink::default().gain(&r, 1.0);
        assert!(floored);
        assert!(g < 1e-11);
        assert_eq!(LinearShrink::default().divergence(&r, 1.0).unwrap(), Some(8.0 * g));
    }

    #[test]
    fn identity_divergence_is_dimension() {
        assert_eq!(Identity.divergence(&[0.0; 10], 1.0).unwrap(), Some(10.0));
    }

    #[test]
    fn df_of_identity_is_zero() {
        let d = divergence_free_wrap(Box::new(Identity), 1.0);
        let r = [1.0, -2.0, 3.5, 0.25];
        assert!(d.denoise(&r, 1.0).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert_eq!(d.divergence(&r, 1.0).unwrap(), Some(0.0));
        assert!(d.output_stage().is_some());
    }

    /// Finite-difference divergence, used as an independent oracle.
    fn fd_divergence(d: &dyn Denoiser, r: &[f64], sigma: f64, h: f64) -> f64 {
        let mut sum = 0.0;
        let mut x = r.to_vec();
        for i in 0..r.len() {
            x[i] = r[i] + h;
            let up = d.denoise(&x, sigma).unwrap()[i];
            x[i] = r[i] - h;
            let down = d.denoise(&x, sigma).unwrap()[i];
            x[i] = r[i];
            sum += (up - down) / (2.0 * h);
        }
        sum
    }

    fn wavy(n: usize) -> Vec<f64> {
        (0..n).map(|k| ((k * 7919 % 97) as f64 / 97.0 - 0.5) * 3.0 + 0.01 * k as f64).collect()
    }

    #[test]
    fn shrink_divergence_matches_finite_differences() {
        let r = wavy(64);
        let d = LinearShrink::default();
        let fd = fd_divergence(&d, &r, 0.4, 1e-6);
        let an = d.divergence(&r, 0.4).unwrap().unwrap();
        assert!((fd - an).abs() < 1e-5, "{fd} vs {an}");
    }

    #[test]
    fn angular_soft_threshold_divergence_matches_finite_differences() {
        let r = wavy(32);
        let d = SoftThreshold { threshold: Threshold::Scaled(1.0), domain: Domain::Angular };
        let fd = fd_divergence(&d, &r, 0.5, 1e-7);
        let an = d.divergence(&r, 0.5).unwrap().unwrap();
        assert!((fd - an).abs() < 1e-4, "{fd} vs {an}");
    }

    #[test]
    fn df_wrapped_divergences_match_finite_differences() {
        let r = wavy(32);
        let inners: Vec<Box<dyn Denoiser>> = vec![
            Box::new(LinearShrink::default()),
            Box::new(SoftThreshold::default()),
            Box::new(SoftThreshold { threshold: Threshold::Scaled(1.0), domain: Domain::Angular }),
        ];
        for inner in inners {
            let d = divergence_free_wrap(inner, 0.8);
            let fd = fd_divergence(&d, &r, 0.5, 1e-7);
            let an = d.divergence(&r, 0.5).unwrap().unwrap();
            assert!((fd - an).abs() < 1e-4, "{}: {fd} vs {an}", d.label());
        }
    }

    #[test]
    fn spec_text_round_trips() {
        for s in [
            "identity",
            "soft:1.5",
            "soft:2:angular",
            "soft-fixed:0.25",
            "shrink",
            "shrink:0.001",
            "df(soft:1.5:angular)",
            "df(shrink;C=0.5)",
            "df(df(identity))",
            "external:python3 denoise.py",
        ] {
            let spec: DenoiserSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("soft:x".parse::<DenoiserSpec>().is_err());
        assert!("wavelet".parse::<DenoiserSpec>().is_err());
    }

    #[test]
    fn external_spec_needs_a_client() {
        let spec: DenoiserSpec = "df(external:foo)".parse().unwrap();
        assert!(!spec.has_analytic_divergence());
        assert!(spec.build().is_err());
    }

    proptest! {
        #[test]
        fn soft_threshold_divergence_is_survivor_count(
            r in proptest::collection::vec(-4.0f64..4.0, 1..200),
            lambda in 0.01f64..2.0,
        ) {
            let d = SoftThreshold { threshold: Threshold::Fixed(lambda), domain: Domain::Spatial };
            let out = d.denoise(&r, 1.0).unwrap();
            let count = r.iter().filter(|x| x.abs() > lambda).count() as f64;
            prop_assert_eq!(d.divergence(&r, 1.0).unwrap(), Some(count));
            for (o, x) in out.iter().zip(&r) {
                prop_assert!(o.abs() <= x.abs());
                prop_assert!(o * x >= 0.0);
            }
        }
    }
}
