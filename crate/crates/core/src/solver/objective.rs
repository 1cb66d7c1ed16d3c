//! Smooth pieces of the learning objective and their gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sem::Dataset;
use crate::solver::expm::matrix_exp;

fn check_square(w: &DMatrix<f64>, d: usize) -> Result<()> {
    if w.nrows() != d || w.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: format!("{d}x{d}"),
            got: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    Ok(())
}

/// `(1/2n) ||X - XW||_F^2` and its gradient `-(1/n) X^T (X - XW)`, evaluated
/// directly on the data.
pub fn loss_ls(x: &Dataset, w: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    check_square(w, x.d())?;
    let xm = x.matrix();
    let n = x.n() as f64;
    let resid = xm - xm * w;
    let value = 0.5 / n * resid.norm_squared();
    let grad = -(xm.transpose() * resid) / n;
    Ok((value, grad))
}

/// Least-squares loss through the second-moment matrix `S = X^T X / n`:
/// `0.5 tr((I - W)^T S (I - W))`. Cost per evaluation is independent of `n`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    cov: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(x: &Dataset) -> Self {
        let xm = x.matrix();
        Self {
            cov: xm.transpose() * xm / x.n() as f64,
        }
    }

    pub fn d(&self) -> usize {
        self.cov.nrows()
    }

    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn eval(&self, w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        // M = S (I - W); value = 0.5 <I - W, M>; grad = -M.
        let mut m = &self.cov * w;
        m.neg_mut();
        m += &self.cov;
        let mut value = 0.0;
        for j in 0..self.d() {
            for i in 0..self.d() {
                let iw = if i == j { 1.0 } else { 0.0 } - w[(i, j)];
                value += iw * m[(i, j)];
            }
        }
        m.neg_mut();
        (0.5 * value, m)
    }
}

/// `h(W) = tr(exp(W ∘ W)) - d` and `∇h = exp(W ∘ W)^T ∘ 2W`.
pub fn acyclicity_h(w: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let e = matrix_exp(&w.component_mul(w))?;
    let value = e.trace() - w.nrows() as f64;
    let grad = e.transpose().component_mul(w) * 2.0;
    Ok((value, grad))
}

/// `h` only; same cost as [`acyclicity_h`] minus one elementwise product.
pub fn acyclicity_value(w: &DMatrix<f64>) -> Result<f64> {
    Ok(matrix_exp(&w.component_mul(w))?.trace() - w.nrows() as f64)
}

/// `||W||_*` and the subgradient `U_r V_r^T` over the nonzero singular values.
pub fn nuclear_norm(w: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("nuclear_norm input"));
    }
    let (r, c) = w.shape();
    if w.is_empty() {
        return Ok((0.0, DMatrix::zeros(r, c)));
    }
    let svd = linalg::svd(w)?;
    let sv = &svd.s;
    let value = sv.sum();
    let cutoff = sv.max() * (r.max(c) as f64) * f64::EPSILON;
    let mut sub = DMatrix::zeros(r, c);
    for k in 0..sv.len() {
        if sv[k] > cutoff && sv[k] > 0.0 {
            sub += svd.u.column(k) * svd.v.column(k).transpose();
        }
    }
    Ok((value, sub))
}

/// Value and gradient of the augmented Lagrangian
/// `loss(W) + α h(W) + (ρ/2) h(W)^2 + λ ||W||_*`.
#[derive(Clone, Debug)]
pub struct AugmentedLagrangian<'a> {
    pub loss: &'a LeastSquares,
    pub alpha: f64,
    pub rho: f64,
    pub lambda_nuc: f64,
}

/// One evaluation of the augmented Lagrangian in `W` coordinates.
#[derive(Clone, Debug)]
pub struct LagrangianEval {
    pub value: f64,
    pub loss: f64,
    pub h: f64,
    pub grad: DMatrix<f64>,
}

impl AugmentedLagrangian<'_> {
    pub fn eval_w(&self, w: &DMatrix<f64>) -> Result<LagrangianEval> {
        let (loss, mut grad) = self.loss.eval(w);
        let (h, gh) = acyclicity_h(w)?;
        let mut value = loss + self.alpha * h + 0.5 * self.rho * h * h;
        grad += gh * (self.alpha + self.rho * h);
        if self.lambda_nuc > 0.0 {
            let (nv, ng) = nuclear_norm(w)?;
            value += self.lambda_nuc * nv;
            grad += ng * self.lambda_nuc;
        }
        Ok(LagrangianEval {
            value,
            loss,
            h,
            grad,
        })
    }

    /// Same objective at `W = U V^T`; returns `(eval, ∂U, ∂V)` with
    /// `∂U = G V` and `∂V = G^T U`.
    pub fn eval_factors(
        &self,
        u: &DMatrix<f64>,
        v: &DMatrix<f64>,
    ) -> Result<(LagrangianEval, DMatrix<f64>, DMatrix<f64>)> {
        let w = u * v.transpose();
        let ev = self.eval_w(&w)?;
        let du = &ev.grad * v;
        let dv = ev.grad.transpose() * u;
        Ok((ev, du, dv))
    }
}

/// How the solver's flat parameter vector maps onto `W`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parameterization {
    /// Full `W` with the diagonal pinned to zero.
    Full { d: usize },
    /// `W = U V^T` with `U, V` of shape `d x rank`.
    Factored { d: usize, rank: usize },
}

impl Parameterization {
    pub fn len(&self) -> usize {
        match *self {
            Self::Full { d } => d * d,
            Self::Factored { d, rank } => 2 * d * rank,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d(&self) -> usize {
        match *self {
            Self::Full { d } | Self::Factored { d, .. } => d,
        }
    }

    /// Factor matrices; `None` for the full parameterization.
    pub fn factors(&self, x: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        match *self {
            Self::Full { .. } => None,
            Self::Factored { d, rank } => {
                let k = d * rank;
                Some((
                    DMatrix::from_column_slice(d, rank, &x.as_slice()[..k]),
                    DMatrix::from_column_slice(d, rank, &x.as_slice()[k..]),
                ))
            }
        }
    }

    pub fn weights(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match *self {
            Self::Full { d } => DMatrix::from_column_slice(d, d, x.as_slice()),
            Self::Factored { .. } => {
                let (u, v) = self.factors(x).expect("factored");
                u * v.transpose()
            }
        }
    }

    /// Augmented Lagrangian value, `W`-space evaluation and flat gradient.
    pub fn eval(
        &self,
        lag: &AugmentedLagrangian<'_>,
        x: &DVector<f64>,
    ) -> Result<(LagrangianEval, DVector<f64>)> {
        match *self {
            Self::Full { .. } => {
                let w = self.weights(x);
                let ev = lag.eval_w(&w)?;
                let mut g = ev.grad.clone();
                g.fill_diagonal(0.0);
                Ok((ev, DVector::from_column_slice(g.as_slice())))
            }
            Self::Factored { d, rank } => {
                let (u, v) = self.factors(x).expect("factored");
                let (ev, du, dv) = lag.eval_factors(&u, &v)?;
                let mut g = DVector::zeros(2 * d * rank);
                g.as_mut_slice()[..d * rank].copy_from_slice(du.as_slice());
                g.as_mut_slice()[d * rank..].copy_from_slice(dv.as_slice());
                Ok((ev, g))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nuclear_norm_of_rank_one_is_product_of_norms() {
        let u = DMatrix::from_fn(6, 1, |i, _| (i as f64 * 1.7).cos() * 0.5);
        let v = DMatrix::from_fn(6, 1, |i, _| ((i + 6) as f64 * 1.7).cos() * 0.5);
        for k in -3..=3 {
            let mut uk = u.clone();
            uk[(1, 0)] += 1e-6 * k as f64;
            let (val, _) = nuclear_norm(&(&uk * v.transpose())).unwrap();
            assert!((val - uk.norm() * v.norm()).abs() < 1e-12, "k={k}: {val}");
        }
    }

    #[test]
    fn loss_at_zero_is_half_mean_square() {
        let x = Dataset::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let (v, _) = loss_ls(&x, &DMatrix::zeros(2, 2)).unwrap();
        assert!((v - 30.0 / 4.0).abs() < 1e-15);
        assert!(loss_ls(&x, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn loss_vanishes_on_noiseless_structure() {
        // Two identical columns, each reproduced exactly from the other.
        let x = Dataset::new(DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -2.0, -2.0, 0.5, 0.5]))
            .unwrap();
        let w0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (v, g) = loss_ls(&x, &w0).unwrap();
        assert!(v.abs() < 1e-15);
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn covariance_route_matches_direct_route() {
        let x = Dataset::new(DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64).sin())).unwrap();
        let w = DMatrix::from_fn(3, 3, |i, j| 0.1 * (i as f64) - 0.2 * (j as f64));
        let (v1, g1) = loss_ls(&x, &w).unwrap();
        let (v2, g2) = LeastSquares::new(&x).eval(&w);
        assert!((v1 - v2).abs() < 1e-12);
        assert!((g1 - g2).abs().max() < 1e-12);
    }

    #[test]
    fn h_examples() {
        let lower = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0, -1.0, 3.0, 0.0]);
        assert!(acyclicity_h(&lower).unwrap().0.abs() < 1e-12);

        let cyc = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let want = 2.0 * 1f64.cosh() - 2.0;
        assert!((acyclicity_h(&cyc).unwrap().0 - want).abs() < 1e-12);

        let a: f64 = 0.7;
        let (v, g) = acyclicity_h(&DMatrix::from_element(1, 1, a)).unwrap();
        assert!((v - ((a * a).exp() - 1.0)).abs() < 1e-14);
        assert!((g[(0, 0)] - 2.0 * a * (a * a).exp()).abs() < 1e-13);
    }

    #[test]
    fn nuclear_examples() {
        assert_eq!(nuclear_norm(&DMatrix::zeros(3, 3)).unwrap().0, 0.0);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
        let (v, g) = nuclear_norm(&w).unwrap();
        assert!((v - 7.0).abs() < 1e-12);
        // Subgradient of |diag| entries is their sign.
        assert!((g[(0, 0)] - 1.0).abs() < 1e-12 && (g[(1, 1)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn lagrangian_reduces_to_loss() {
        let x = Dataset::new(DMatrix::from_fn(5, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 1.0))).unwrap();
        let ls = LeastSquares::new(&x);
        let dagw = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.2, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        let lag = AugmentedLagrangian { loss: &ls, alpha: 3.0, rho: 10.0, lambda_nuc: 0.0 };
        let ev = lag.eval_w(&dagw).unwrap();
        assert!((ev.value - ls.eval(&dagw).0).abs() < 1e-12);

        let lag = AugmentedLagrangian { lambda_nuc: 0.5, ..lag };
        let ev = lag.eval_w(&dagw).unwrap();
        let nuc = nuclear_norm(&dagw).unwrap().0;
        assert!((ev.value - ls.eval(&dagw).0 - 0.5 * nuc).abs() < 1e-12);

        let cyc = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for rho in [1e-2, 1e-5, 1e-8] {
            let lag = AugmentedLagrangian { loss: &ls, alpha: 0.0, rho, lambda_nuc: 0.0 };
            let gap = lag.eval_w(&cyc).unwrap().value - ls.eval(&cyc).0;
            assert!(gap >= 0.0 && gap < rho);
        }
    }

    #[test]
    fn full_parameterization_pins_diagonal() {
        let x = Dataset::new(DMatrix::from_fn(6, 2, |i, j| (i + 2 * j) as f64)).unwrap();
        let ls = LeastSquares::new(&x);
        let lag = AugmentedLagrangian { loss: &ls, alpha: 0.0, rho: 1.0, lambda_nuc: 0.0 };
        let p = Parameterization::Full { d: 2 };
        let (_, g) = p.eval(&lag, &DVector::zeros(4)).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.0);
        assert!(g[1] != 0.0 || g[2] != 0.0);
    }
}
