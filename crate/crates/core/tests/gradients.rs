//! Analytic gradients against central finite differences.

use lowrank_dag::solver::{
    acyclicity_h, loss_ls, nuclear_norm, AugmentedLagrangian, LeastSquares, Parameterization,
};
use lowrank_dag::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-5;

fn central_diff(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let x0 = xp[i];
        xp[i] = x0 + STEP;
        let fp = f(&xp);
        xp[i] = x0 - STEP;
        let fm = f(&xp);
        xp[i] = x0;
        g[i] = (fp - fm) / (2.0 * STEP);
    }
    g
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

fn flat(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn mat(x: &DVector<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, x.as_slice())
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    Dataset::new(random_matrix(rng, n, d, 2.0)).unwrap()
}

#[test]
fn loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let d = 2 + k % 7;
        let x = random_data(&mut rng, 50, d);
        let w = flat(&random_matrix(&mut rng, d, d, 0.5));
        let (_, g) = loss_ls(&x, &mat(&w, d)).unwrap();
        let fd = central_diff(|v| loss_ls(&x, &mat(v, d)).unwrap().0, &w);
        assert!(rel_err(&flat(&g), &fd) < REL_TOL, "d={d}: {}", rel_err(&flat(&g), &fd));
    }
}

#[test]
fn second_moment_loss_matches_direct_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let x = random_data(&mut rng, 40, 5);
        let w = random_matrix(&mut rng, 5, 5, 0.5);
        let (v1, g1) = loss_ls(&x, &w).unwrap();
        let (v2, g2) = LeastSquares::new(&x).eval(&w);
        assert!((v1 - v2).abs() < 1e-10 * v1.abs().max(1.0));
        assert!((g1 - &g2).norm() < 1e-10 * (1.0 + g2.norm()));
    }
}

#[test]
fn acyclicity_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..20 {
        let d = 2 + k % 7;
        let w = flat(&random_matrix(&mut rng, d, d, 0.8));
        let (_, g) = acyclicity_h(&mat(&w, d)).unwrap();
        let fd = central_diff(|v| acyclicity_h(&mat(v, d)).unwrap().0, &w);
        assert!(rel_err(&flat(&g), &fd) < REL_TOL, "d={d}: {}", rel_err(&flat(&g), &fd));
    }
}

#[test]
fn nuclear_norm_gradient_at_generic_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 20 {
        let d = 2 + checked % 7;
        let m = random_matrix(&mut rng, d, d, 1.0);
        let s = lowrank_dag::linalg::singular_values(&m).unwrap();
        // Skip near-degenerate spectra, where the norm is not differentiable.
        if s[d - 1] < 1e-2 || s.as_slice().windows(2).any(|p| p[0] - p[1] < 1e-2) {
            continue;
        }
        let w = flat(&m);
        let (_, g) = nuclear_norm(&m).unwrap();
        let fd = central_diff(|v| nuclear_norm(&mat(v, d)).unwrap().0, &w);
        assert!(rel_err(&flat(&g), &fd) < REL_TOL, "d={d}: {}", rel_err(&flat(&g), &fd));
        checked += 1;
    }
}

#[test]
fn nuclear_norm_values() {
    assert_eq!(nuclear_norm(&DMatrix::zeros(3, 3)).unwrap().0, 0.0);
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
    assert!((nuclear_norm(&m).unwrap().0 - 7.0).abs() < 1e-12);
}

fn lagrangian_points(seed: u64) -> impl Iterator<Item = (usize, Dataset, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20).map(move |k| {
        let d = 3 + k % 6;
        let x = random_data(&mut rng, 30, d);
        let alpha = rng.random_range(0.0..5.0);
        let rho = 10f64.powf(rng.random_range(-1.0..2.0));
        let lambda = if k % 2 == 0 { 0.0 } else { 0.1 };
        (d, x, alpha, rho, lambda)
    })
}

#[test]
fn lagrangian_gradient_in_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for (d, x, alpha, rho, lambda_nuc) in lagrangian_points(16) {
        let ls = LeastSquares::new(&x);
        let lag = AugmentedLagrangian { loss: &ls, alpha, rho, lambda_nuc };
        let w = flat(&random_matrix(&mut rng, d, d, 0.4));
        let g = lag.eval_w(&mat(&w, d)).unwrap().grad;
        let fd = central_diff(|v| lag.eval_w(&mat(v, d)).unwrap().value, &w);
        assert!(rel_err(&flat(&g), &fd) < REL_TOL, "d={d}: {}", rel_err(&flat(&g), &fd));
    }
}

#[test]
fn lagrangian_gradient_in_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (d, x, alpha, rho, lambda_nuc) in lagrangian_points(18) {
        let rank = 1 + d % 3;
        let ls = LeastSquares::new(&x);
        let lag = AugmentedLagrangian { loss: &ls, alpha, rho, lambda_nuc };
        let p = Parameterization::Factored { d, rank };
        let theta = DVector::from_fn(p.len(), |_, _| rng.random_range(-0.6..0.6));
        let (_, g) = p.eval(&lag, &theta).unwrap();
        let fd = central_diff(|v| p.eval(&lag, v).unwrap().0.value, &theta);
        assert!(rel_err(&g, &fd) < REL_TOL, "d={d} r={rank}: {}", rel_err(&g, &fd));
    }
}

#[test]
fn factored_objective_matches_full_at_corresponding_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for d in 2..8 {
        let x = random_data(&mut rng, 30, d);
        let ls = LeastSquares::new(&x);
        let lag = AugmentedLagrangian { loss: &ls, alpha: 1.3, rho: 7.0, lambda_nuc: 0.0 };
        let mut w = random_matrix(&mut rng, d, d, 0.5);
        w.fill_diagonal(0.0);
        // U = W, V = I maps onto the same W.
        let mut theta = DVector::zeros(2 * d * d);
        theta.as_mut_slice()[..d * d].copy_from_slice(w.as_slice());
        theta.as_mut_slice()[d * d..].copy_from_slice(DMatrix::<f64>::identity(d, d).as_slice());
        let full = Parameterization::Full { d }.eval(&lag, &flat(&w)).unwrap().0.value;
        let fact = Parameterization::Factored { d, rank: d }.eval(&lag, &theta).unwrap().0.value;
        assert!((full - fact).abs() < 1e-12 * full.abs().max(1.0), "{full} vs {fact}");
    }
}
