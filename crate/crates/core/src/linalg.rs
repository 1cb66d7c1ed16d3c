//! Singular value decomposition on nalgebra matrices.
//!
//! nalgebra's bidiagonal QR can stall or return a wrong spectrum on sparse
//! DAG weight matrices with large hubs, so decompositions go through faer.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD `A = U diag(s) V^T` with `s` in non-increasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Minimum-norm least-squares solution of `A x = b`, treating singular
    /// values at or below `cutoff` as zero.
    pub fn solve(&self, b: &DVector<f64>, cutoff: f64) -> DVector<f64> {
        let mut ut_b = self.u.tr_mul(b);
        for (k, x) in ut_b.iter_mut().enumerate() {
            let s = self.s[k];
            *x = if s > cutoff { *x / s } else { 0.0 };
        }
        &self.v * ut_b
    }
}

fn to_faer(a: &DMatrix<f64>) -> Result<Mat<f64>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("SVD input"));
    }
    Ok(Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]))
}

fn svd_error(e: faer::linalg::svd::SvdError) -> Error {
    Error::Numerical(format!("SVD did not converge: {e:?}"))
}

pub fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        let k = r.min(c);
        return Ok(Svd {
            u: DMatrix::zeros(r, k),
            s: DVector::zeros(k),
            v: DMatrix::zeros(c, k),
        });
    }
    let f = to_faer(a)?.thin_svd().map_err(svd_error)?;
    let k = r.min(c);
    let (fu, fs, fv) = (f.U(), f.S().column_vector(), f.V());
    Ok(Svd {
        u: DMatrix::from_fn(r, k, |i, j| fu[(i, j)]),
        s: DVector::from_fn(k, |i, _| fs[i]),
        v: DMatrix::from_fn(c, k, |i, j| fv[(i, j)]),
    })
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if a.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let s = to_faer(a)?.singular_values().map_err(svd_error)?;
    Ok(DVector::from_vec(s))
}
