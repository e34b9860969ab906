//! AMP and OAMP iterations on the real-stacked system `y = M h + n`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, ComplexMatrix};
use crate::noise::{pca_noise_level, NoiseEstimate};
use crate::oracle::Oracle;
use crate::sure::{mc_divergence, McOptions, SigmaTag};

/// De-correlated linear estimator `W = (2N / tr(M^+ M)) M^+`.
#[derive(Debug, Clone)]
pub struct DecorrelatedLe {
    pub w: DMatrix<f64>,
    pub scale: f64,
    /// `tr(I - W M)`; zero up to rounding.
    pub trace_defect: f64,
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(A B) = sum_ij A_ij B_ji
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

impl DecorrelatedLe {
    pub fn from_pinv(pinv: DMatrix<f64>, m: &DMatrix<f64>) -> Self {
        let n2 = m.ncols() as f64;
        let tr = trace_of_product(&pinv, m);
        let scale = n2 / tr;
        let w = pinv * scale;
        let trace_defect = n2 - trace_of_product(&w, m);
        Self { w, scale, trace_defect }
    }

    /// Build from a real measurement matrix of full row rank.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let pinv = crate::linalg::pinv_full_row_rank(m)?;
        Ok(Self::from_pinv(pinv, m))
    }

    /// Build from the complex matrix; `m` must be its real stacking.
    pub fn from_complex(mc: &ComplexMatrix, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != 2 * mc.nrows() || m.ncols() != 2 * mc.ncols() {
            return Err(Error::DimensionMismatch { expected: 2 * mc.nrows(), got: m.nrows() });
        }
        Ok(Self::from_pinv(mc.pinv()?.realify(), m))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.w * DVector::from_column_slice(v)).data.into()
    }
}

/// Source of the per-real-component error variance of `r_t`.
#[derive(Debug, Clone, Copy)]
pub enum SigmaSource<'a> {
    /// Blind PCA estimate on `r_t` with window area `window`.
    Pca { window: usize },
    /// `||r_t - h||^2 / 2N` from the true channel (evaluation only).
    Oracle(&'a Oracle<Vec<f64>>),
    /// A fixed variance.
    Fixed(f64),
}

impl SigmaSource<'_> {
    pub fn tag(&self) -> SigmaTag {
        match self {
            SigmaSource::Pca { .. } => SigmaTag::Pca,
            SigmaSource::Oracle(_) => SigmaTag::Oracle,
            SigmaSource::Fixed(_) => SigmaTag::Fixed,
        }
    }

    /// Returns the variance and, for PCA, the underlying estimate.
    pub fn estimate(&self, r: &[f64]) -> Result<(f64, Option<NoiseEstimate>)> {
        match self {
            SigmaSource::Pca { window } => {
                let est = pca_noise_level(r, *window)?;
                Ok((est.real_variance(), Some(est)))
            }
            SigmaSource::Oracle(h) => {
                let h = h.reveal();
                if h.len() != r.len() {
                    return Err(Error::DimensionMismatch { expected: h.len(), got: r.len() });
                }
                Ok((dist_sq(r, h) / r.len() as f64, None))
            }
            SigmaSource::Fixed(v) => Ok((*v, None)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    /// Iteration index, starting at 1.
    pub t: usize,
    /// Estimate entering the linear stage.
    pub h_t: Vec<f64>,
    /// Pseudo-observation handed to the denoiser.
    pub r_t: Vec<f64>,
    pub sigma2_e_hat: f64,
    pub noise: Option<NoiseEstimate>,
    /// Denoiser output that drives the next iteration.
    pub next: Vec<f64>,
    /// Reported channel estimate (output stage of the denoiser).
    pub estimate: Vec<f64>,
    /// Normalized divergence of the iterate denoiser at `r_t`, when computed.
    pub onsager_divergence: Option<f64>,
}

/// Measurements and the real-stacked matrix.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub y: &'a [f64],
    pub m: &'a DMatrix<f64>,
}

impl Problem<'_> {
    fn check(&self, h: &[f64]) -> Result<()> {
        if self.m.nrows() != self.y.len() {
            return Err(Error::DimensionMismatch { expected: self.m.nrows(), got: self.y.len() });
        }
        if self.m.ncols() != h.len() {
            return Err(Error::DimensionMismatch { expected: self.m.ncols(), got: h.len() });
        }
        Ok(())
    }

    /// `y - M h`
    pub fn residual(&self, h: &[f64]) -> Vec<f64> {
        let mh = self.m * DVector::from_column_slice(h);
        self.y.iter().zip(mh.iter()).map(|(a, b)| a - b).collect()
    }
}

fn finish_state(
    t: usize,
    h_t: &[f64],
    r_t: Vec<f64>,
    den: &dyn Denoiser,
    source: &SigmaSource<'_>,
) -> Result<IterateState> {
    let (sigma2, noise) = source.estimate(&r_t)?;
    let sigma = sigma2.max(0.0).sqrt();
    let next = den.denoise(&r_t, sigma)?;
    if next.len() != r_t.len() {
        return Err(Error::DimensionMismatch { expected: r_t.len(), got: next.len() });
    }
    let estimate = match den.output_stage() {
        Some(out) => out.denoise(&r_t, sigma)?,
        None => next.clone(),
    };
    Ok(IterateState {
        t,
        h_t: h_t.to_vec(),
        r_t,
        sigma2_e_hat: sigma2,
        noise,
        next,
        estimate,
        onsager_divergence: None,
    })
}

/// `r_t = h_t + W (y - M h_t)`, then `h_{t+1} = eta(r_t)`.
pub fn oamp_step(
    t: usize,
    h_t: &[f64],
    problem: &Problem<'_>,
    le: &DecorrelatedLe,
    den: &dyn Denoiser,
    source: &SigmaSource<'_>,
) -> Result<IterateState> {
    problem.check(h_t)?;
    let correction = le.apply(&problem.residual(h_t));
    let r_t = h_t.iter().zip(&correction).map(|(a, b)| a + b).collect();
    finish_state(t, h_t, r_t, den, source)
}

/// `r_t = h_t + M^T (y - M h_t) + (cols / rows) div (r_{t-1} - h_{t-1})`
/// with `div` the normalized divergence of the previous denoiser call.
pub fn amp_step(
    t: usize,
    h_t: &[f64],
    prev: Option<&IterateState>,
    problem: &Problem<'_>,
    den: &dyn Denoiser,
    source: &SigmaSource<'_>,
    probe_seed: u64,
) -> Result<IterateState> {
    problem.check(h_t)?;
    let z = problem.residual(h_t);
    let back = problem.m.tr_mul(&DVector::from_column_slice(&z));
    let mut r_t: Vec<f64> = h_t.iter().zip(back.iter()).map(|(a, b)| a + b).collect();
    if let Some(p) = prev {
        let div = p.onsager_divergence.ok_or_else(|| Error::InvalidConfig("previous state lacks a divergence".into()))?;
        let ratio = problem.m.ncols() as f64 / problem.m.nrows() as f64;
        for ((r, a), b) in r_t.iter_mut().zip(&p.r_t).zip(&p.h_t) {
            *r += ratio * div * (a - b);
        }
    }
    let mut state = finish_state(t, h_t, r_t, den, source)?;
    let sigma = state.sigma2_e_hat.max(0.0).sqrt();
    let sum = match den.divergence(&state.r_t, sigma)? {
        Some(d) => d,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(probe_seed ^ t as u64);
            mc_divergence(den, &state.r_t, sigma, &mut rng, &McOptions::default())?.divergence
        }
    };
    state.onsager_divergence = Some(sum / state.r_t.len() as f64);
    Ok(state)
}

#[derive(Debug, Clone)]
pub enum Algorithm {
    Oamp(DecorrelatedLe),
    /// Requires an i.i.d. sub-Gaussian `M`.
    Amp,
}

pub const DEFAULT_ITERATIONS: usize = 15;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub iterations: usize,
    /// Seed for Monte-Carlo divergence probes inside AMP.
    pub probe_seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS, probe_seed: 0 }
    }
}

pub type Observer<'o> = dyn FnMut(&IterateState) -> Result<()> + 'o;

/// Run `iterations` steps from `h_0 = 0`, calling each observer in order
/// after every step.
pub fn run_pipeline(
    problem: &Problem<'_>,
    algorithm: &Algorithm,
    den: &dyn Denoiser,
    source: &SigmaSource<'_>,
    opts: &PipelineOptions,
    observers: &mut [&mut Observer<'_>],
) -> Result<Vec<IterateState>> {
    if opts.iterations == 0 {
        return Err(Error::InvalidConfig("at least one iteration is required".into()));
    }
    let mut h = vec![0.0; problem.m.ncols()];
    let mut states: Vec<IterateState> = Vec::with_capacity(opts.iterations);
    for t in 1..=opts.iterations {
        let state = match algorithm {
            Algorithm::Oamp(le) => oamp_step(t, &h, problem, le, den, source)?,
            Algorithm::Amp => amp_step(t, &h, states.last(), problem, den, source, opts.probe_seed)?,
        };
        for obs in observers.iter_mut() {
            obs(&state)?;
        }
        h.clone_from(&state.next);
        states.push(state);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{divergence_free_wrap, Domain, Identity, SoftThreshold, Threshold};
    use crate::measurement::gen_iid_matrix;

    #[test]
    fn padded_identity_le() {
        let mut m = DMatrix::zeros(2, 4);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        let le = DecorrelatedLe::new(&m).unwrap();
        assert!((le.scale - 2.0).abs() < 1e-15);
        assert_eq!(le.w, m.transpose() * 2.0);
        assert!(le.trace_defect.abs() < 1e-12);
    }

    #[test]
    fn scaled_orthonormal_rows() {
        // rows of a permutation-like orthonormal matrix, scaled by c
        let c = 3.0;
        let mut m = DMatrix::zeros(3, 6);
        for (i, j) in [(0, 4), (1, 0), (2, 2)] {
            m[(i, j)] = c;
        }
        let le = DecorrelatedLe::new(&m).unwrap();
        let expected = m.transpose() * (6.0 / 3.0 / c / c);
        assert!((le.w - expected).abs().max() < 1e-14);
    }

    #[test]
    fn rank_deficient_reports_condition() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(DecorrelatedLe::new(&m), Err(Error::RankDeficient { .. })));
    }

    fn iid_problem(seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gen_iid_matrix(64, 128, &mut rng);
        let h: Vec<f64> = (0..128).map(|k| if k % 9 == 0 { 1.0 } else { 0.0 }).collect();
        (m, h)
    }

    #[test]
    fn perfect_start_is_fixed_point_of_identity() {
        let (m, h) = iid_problem(1);
        let y: Vec<f64> = (&m * DVector::from_column_slice(&h)).data.into();
        let problem = Problem { y: &y, m: &m };
        let le = DecorrelatedLe::new(&m).unwrap();
        let s = oamp_step(1, &h, &problem, &le, &Identity, &SigmaSource::Fixed(0.01)).unwrap();
        let err = dist_sq(&s.r_t, &h).sqrt();
        assert!(err < 1e-10, "{err}");
        assert_eq!(s.next, s.r_t);
    }

    #[test]
    fn zero_start_gives_wy() {
        let (m, h) = iid_problem(2);
        let y: Vec<f64> = (&m * DVector::from_column_slice(&h)).data.into();
        let problem = Problem { y: &y, m: &m };
        let le = DecorrelatedLe::new(&m).unwrap();
        let s = oamp_step(1, &vec![0.0; 128], &problem, &le, &Identity, &SigmaSource::Fixed(0.01)).unwrap();
        assert_eq!(s.r_t, le.apply(&y));
    }

    #[test]
    fn amp_first_step_has_no_onsager_and_identity_ratio() {
        let (m, h) = iid_problem(3);
        let y: Vec<f64> = (&m * DVector::from_column_slice(&h)).data.into();
        let problem = Problem { y: &y, m: &m };
        let zero = vec![0.0; 128];
        let s1 = amp_step(1, &zero, None, &problem, &Identity, &SigmaSource::Fixed(0.01), 0).unwrap();
        let mty: Vec<f64> = m.tr_mul(&DVector::from_column_slice(&y)).data.into();
        assert_eq!(s1.r_t, mty);
        assert_eq!(s1.onsager_divergence, Some(1.0));

        let s2 = amp_step(2, &s1.next, Some(&s1), &problem, &Identity, &SigmaSource::Fixed(0.01), 0).unwrap();
        let plain = amp_step(2, &s1.next, None, &problem, &Identity, &SigmaSource::Fixed(0.01), 0).unwrap();
        for k in 0..128 {
            let onsager = 2.0 * (s1.r_t[k] - s1.h_t[k]);
            assert!((s2.r_t[k] - plain.r_t[k] - onsager).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_threshold_onsager_divergence_counts_survivors() {
        let (m, h) = iid_problem(4);
        let y: Vec<f64> = (&m * DVector::from_column_slice(&h)).data.into();
        let problem = Problem { y: &y, m: &m };
        let den = SoftThreshold { threshold: Threshold::Fixed(0.2), domain: Domain::Spatial };
        let s = amp_step(1, &vec![0.0; 128], None, &problem, &den, &SigmaSource::Fixed(0.01), 0).unwrap();
        let count = s.r_t.iter().filter(|x| x.abs() > 0.2).count() as f64;
        assert_eq!(s.onsager_divergence, Some(count / 128.0));
    }

    #[test]
    fn observers_see_increasing_t_and_runs_repeat() {
        let (m, h) = iid_problem(5);
        let y: Vec<f64> = (&m * DVector::from_column_slice(&h)).data.into();
        let problem = Problem { y: &y, m: &m };
        let le = DecorrelatedLe::new(&m).unwrap();
        let den = divergence_free_wrap(Box::new(SoftThreshold::default()), 1.0);
        let algo = Algorithm::Oamp(le);
        let mut seen = Vec::new();
        let mut obs = |s: &IterateState| {
            seen.push(s.t);
            Ok(())
        };
        let opts = PipelineOptions { iterations: 6, probe_seed: 0 };
        let a = run_pipeline(&problem, &algo, &den, &SigmaSource::Fixed(1e-3), &opts, &mut [&mut obs]).unwrap();
        assert_eq!(seen, vec![1, 2, 3, 4, 5, 6]);
        let b = run_pipeline(&problem, &algo, &den, &SigmaSource::Fixed(1e-3), &opts, &mut []).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_source_is_audited() {
        let h = Oracle::new(vec![1.0, 2.0]);
        let src = SigmaSource::Oracle(&h);
        let ((v, _), violations) = crate::oracle::blind_scope(|| src.estimate(&[1.0, 4.0]).unwrap());
        assert_eq!(v, 2.0);
        assert_eq!(violations, 1);
    }
}
