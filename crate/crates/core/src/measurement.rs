//! Partially-connected hybrid combining, noise whitening and pilot simulation.

use nalgebra::{DMatrix, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::{noise_variance_from_snr, ScenarioConfig};
use crate::error::{Error, Result};
use crate::field::ChannelInstance;
use crate::linalg::{realify_vec, ComplexMatrix};
use crate::oracle::Oracle;

type CMat = DMatrix<Complex64>;

/// Combiners of every pilot slot and the resulting measurement matrices.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    /// `W_RF,q`, each `N x N_RF` and block diagonal.
    pub analog: Vec<ComplexMatrix>,
    /// `W_BB,q = D_q^{-1}`, each `N_RF x N_RF`.
    pub digital: Vec<ComplexMatrix>,
    /// `M~`, `Q N_RF x N`; row block q is `W_BB,q^H W_RF,q^H`.
    pub matrix: ComplexMatrix,
    /// Real-stacked `M`, `2 Q N_RF x 2 N`.
    pub real_matrix: DMatrix<f64>,
}

impl MeasurementEnsemble {
    pub fn n_slots(&self) -> usize {
        self.analog.len()
    }

    pub fn n_rf(&self) -> usize {
        self.digital.first().map_or(0, |d| d.nrows())
    }
}

/// Received pilots of one channel use.
#[derive(Debug, Clone)]
pub struct Pilots {
    /// `y~`, length `Q N_RF`.
    pub complex: Vec<Complex64>,
    /// `y = [Re y~; Im y~]`.
    pub real: Vec<f64>,
    /// True complex noise variance `sigma_n^2` (zero when noise is disabled).
    pub noise_variance: Oracle<f64>,
}

fn to_cmat(m: &ComplexMatrix) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m.get(i, j))
}

fn from_cmat(m: &CMat) -> ComplexMatrix {
    ComplexMatrix { re: m.map(|z| z.re), im: m.map(|z| z.im) }
}

/// Upper-triangular `D` with `D^H D = G` for a Hermitian positive definite `G`.
pub fn cholesky_upper(gram: &CMat) -> Option<CMat> {
    let l = gram.clone().cholesky()?.unpack();
    Some(l.adjoint())
}

/// Draw analog combiners, derive whitening digital combiners and assemble `M~`.
pub fn build_measurement<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<MeasurementEnsemble> {
    config.validate()?;
    let n = config.n_antennas;
    let n_rf = config.n_rf;
    let block = n / n_rf;
    let amp = (n_rf as f64 / n as f64).sqrt();

    let mut analog = Vec::with_capacity(config.n_slots);
    let mut digital = Vec::with_capacity(config.n_slots);
    let mut matrix = ComplexMatrix::zeros(config.n_measurements(), n);

    for q in 0..config.n_slots {
        let mut w_rf = ComplexMatrix::zeros(n, n_rf);
        for i in 0..n_rf {
            for j in 0..block {
                let v = if rng.random::<bool>() { amp } else { -amp };
                w_rf.re[(i * block + j, i)] = v;
            }
        }
        let w = to_cmat(&w_rf);
        let gram = w.adjoint() * &w;
        let d = cholesky_upper(&gram).ok_or(Error::CombinerDegenerate { slot: q })?;
        let w_bb = d.clone().try_inverse().ok_or(Error::CombinerDegenerate { slot: q })?;
        let rows = w_bb.adjoint() * w.adjoint();
        for i in 0..n_rf {
            for j in 0..n {
                matrix.set(q * n_rf + i, j, rows[(i, j)]);
            }
        }
        analog.push(w_rf);
        digital.push(from_cmat(&w_bb));
    }
    let real_matrix = matrix.realify();
    Ok(MeasurementEnsemble { analog, digital, matrix, real_matrix })
}

/// `y~ = M~ h~ + n~`, where `n~` is the combined antenna noise.
///
/// Antenna noise is drawn per slot as `CN(0, sigma^2 I_N)` and passed
/// through the slot's combiners, so the whitening is exercised rather
/// than assumed.
pub fn simulate_pilots<R: Rng + ?Sized>(
    channel: &ChannelInstance,
    ensemble: &MeasurementEnsemble,
    snr_db: f64,
    rng: &mut R,
) -> Result<Pilots> {
    let h = channel.complex.reveal();
    if h.len() != ensemble.matrix.ncols() {
        return Err(Error::DimensionMismatch { expected: ensemble.matrix.ncols(), got: h.len() });
    }
    let sigma2 = noise_variance_from_snr(snr_db);
    let mut y = ensemble.matrix.mul_vec(h);
    if sigma2 > 0.0 {
        let n = h.len();
        let n_rf = ensemble.n_rf();
        let s = (sigma2 / 2.0).sqrt();
        for (q, (w_rf, w_bb)) in ensemble.analog.iter().zip(&ensemble.digital).enumerate() {
            let noise = CMat::from_fn(n, 1, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(s * re, s * im)
            });
            let eff = to_cmat(w_bb).adjoint() * (to_cmat(w_rf).adjoint() * noise);
            for i in 0..n_rf {
                y[q * n_rf + i] += eff[(i, 0)];
            }
        }
    }
    let real = realify_vec(&y);
    Ok(Pilots { complex: y, real, noise_variance: Oracle::new(sigma2) })
}

/// Real matrix with i.i.d. `N(0, 1/rows)` entries.
pub fn gen_iid_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let normal = Normal::new(0.0, (1.0 / rows as f64).sqrt()).expect("finite std");
    DMatrix::from_fn_generic(Dyn(rows), Dyn(cols), |_, _| normal.sample(rng))
}
