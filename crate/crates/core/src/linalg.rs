//! Real stacking of complex quantities and the full-row-rank pseudo-inverse.
//!
//! Convention: a complex vector `x` maps to `[Re x; Im x]` and a complex
//! matrix `A` maps to `[[Re A, -Im A], [Im A, Re A]]`, so that
//! `realify(A x) = realify(A) realify(x)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition number above which a Gram matrix is treated as singular.
const MAX_CONDITION: f64 = 1e12;

pub fn realify_vec(x: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * x.len());
    out.extend(x.iter().map(|z| z.re));
    out.extend(x.iter().map(|z| z.im));
    out
}

pub fn complexify_vec(x: &[f64]) -> Vec<Complex64> {
    assert!(x.len().is_multiple_of(2), "real-stacked vector must have even length");
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense complex matrix stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { re: DMatrix::zeros(rows, cols), im: DMatrix::zeros(rows, cols) }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.re[(i, j)] = z.re;
        self.im[(i, j)] = z.im;
    }

    pub fn is_real(&self) -> bool {
        self.im.iter().all(|v| *v == 0.0)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols());
        let xr = DVector::from_iterator(x.len(), x.iter().map(|z| z.re));
        let xi = DVector::from_iterator(x.len(), x.iter().map(|z| z.im));
        let yr = &self.re * &xr - &self.im * &xi;
        let yi = &self.re * &xi + &self.im * &xr;
        yr.iter().zip(yi.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect()
    }

    /// `[[Re, -Im], [Im, Re]]`.
    pub fn realify(&self) -> DMatrix<f64> {
        let (r, c) = self.re.shape();
        let mut out = DMatrix::zeros(2 * r, 2 * c);
        out.view_mut((0, 0), (r, c)).copy_from(&self.re);
        out.view_mut((0, c), (r, c)).copy_from(&(-&self.im));
        out.view_mut((r, 0), (r, c)).copy_from(&self.im);
        out.view_mut((r, c), (r, c)).copy_from(&self.re);
        out
    }

    /// Inverse of [`ComplexMatrix::realify`]: reads the left block column.
    pub fn from_realified(m: &DMatrix<f64>) -> Self {
        let (r, c) = (m.nrows() / 2, m.ncols() / 2);
        Self {
            re: m.view((0, 0), (r, c)).into_owned(),
            im: m.view((r, 0), (r, c)).into_owned(),
        }
    }

    /// Moore-Penrose pseudo-inverse of a full-row-rank complex matrix.
    ///
    /// Purely real matrices take the real path, which is four times cheaper
    /// than working on the stacked form.
    pub fn pinv(&self) -> Result<Self> {
        if self.is_real() {
            let p = pinv_full_row_rank(&self.re)?;
            let im = DMatrix::zeros(p.nrows(), p.ncols());
            Ok(Self { re: p, im })
        } else {
            Ok(Self::from_realified(&pinv_full_row_rank(&self.realify())?))
        }
    }
}

/// Pseudo-inverse `M^T (M M^T)^{-1}` of a matrix with full row rank.
pub fn pinv_full_row_rank(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = m * m.transpose();
    let chol = match gram.clone().cholesky() {
        Some(c) => c,
        None => return Err(Error::RankDeficient { condition: condition_from_gram(&gram) }),
    };
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    // cond(M) >= max L_ii / min L_ii for the Cholesky factor of M M^T.
    if lo <= 0.0 || hi / lo > MAX_CONDITION.sqrt() {
        return Err(Error::RankDeficient { condition: condition_from_gram(&gram) });
    }
    let ginv = chol.inverse();
    let p = m.tr_mul(&ginv);
    Ok(p)
}

/// Condition number of `M` from the spectrum of `M M^T`.
fn condition_from_gram(gram: &DMatrix<f64>) -> f64 {
    let ev = gram.clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(0.0f64, f64::max);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    if min == 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}
