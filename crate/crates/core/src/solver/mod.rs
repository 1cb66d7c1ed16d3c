//! Continuous DAG learning for linear SEMs.
//!
//! Minimizes the least-squares loss subject to `h(W) = 0` with an augmented
//! Lagrangian: each outer step solves the primal problem with L-BFGS,
//! multiplying `ρ` until `h` has dropped by the factor `c`, then takes a dual
//! step `α += ρ h`. The weights are either a full matrix (diagonal pinned to
//! zero) or a rank-`r̂` product `U V^T`.

pub mod expm;
pub mod lbfgs;
pub mod objective;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{validate_acyclic, Acyclicity, Dag, WeightedDag};
use crate::graphgen::rng_from_seed;
use crate::sem::Dataset;

pub use expm::matrix_exp;
pub use lbfgs::{LbfgsConfig, LbfgsOutcome, LbfgsStatus};
pub use objective::{
    acyclicity_h, loss_ls, nuclear_norm, AugmentedLagrangian, LagrangianEval, LeastSquares,
    Parameterization,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Factorization width; `None` fits the full matrix.
    pub rank_hat: Option<usize>,
    /// Required per-step reduction of `h`, in `(0, 1)`.
    pub c: f64,
    /// Acyclicity tolerance.
    pub epsilon: f64,
    /// Edge threshold on `|W|`.
    pub w_threshold: f64,
    pub rho_init: f64,
    pub rho_mult: f64,
    pub rho_max: f64,
    pub alpha_init: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub inner_f_rel_tol: f64,
    pub lambda_nuc: f64,
    /// Factor entries start as `N(0, (init_scale / sqrt(r̂))^2)`.
    pub init_scale: f64,
    pub seed: u64,
    /// Subtract column means before fitting.
    pub center: bool,
    /// Refit the thresholded structure by least squares and threshold again.
    pub prune: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank_hat: None,
            c: 0.25,
            epsilon: 1e-8,
            w_threshold: 0.3,
            rho_init: 1.0,
            rho_mult: 10.0,
            rho_max: 1e16,
            alpha_init: 0.0,
            max_outer: 100,
            inner_tol: 1e-6,
            inner_max_iter: 15000,
            inner_f_rel_tol: 2.220446049250313e-9,
            lambda_nuc: 0.0,
            init_scale: 0.1,
            seed: 0,
            center: true,
            prune: true,
        }
    }
}

impl SolverConfig {
    pub fn low_rank(rank_hat: usize) -> Self {
        Self {
            rank_hat: Some(rank_hat),
            ..Self::default()
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("c must lie in (0, 1), got {}", self.c));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.w_threshold > 0.0) {
            return bad(format!("w_threshold must be positive, got {}", self.w_threshold));
        }
        if !(self.rho_init > 0.0 && self.rho_mult > 1.0 && self.rho_max >= self.rho_init) {
            return bad("need rho_init > 0, rho_mult > 1, rho_max >= rho_init".into());
        }
        if !(self.lambda_nuc >= 0.0) {
            return bad(format!("lambda_nuc must be nonnegative, got {}", self.lambda_nuc));
        }
        if !(self.init_scale > 0.0) {
            return bad(format!("init_scale must be positive, got {}", self.init_scale));
        }
        if let Some(r) = self.rank_hat {
            if r < 1 || r > d {
                return bad(format!("rank_hat must lie in [1, {d}], got {r}"));
            }
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            grad_tol: self.inner_tol,
            max_iter: self.inner_max_iter,
            f_rel_tol: self.inner_f_rel_tol,
            ..LbfgsConfig::default()
        }
    }
}

/// State after one accepted outer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub loss: f64,
    pub h: f64,
    pub rho: f64,
    pub alpha: f64,
    /// L-BFGS iterations spent in this outer step, across `ρ` increases.
    pub inner_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Final weights: thresholded, made acyclic, and refit when pruning is on.
    #[serde(with = "nested_rows")]
    pub w_star: DMatrix<f64>,
    /// Continuous solution before thresholding.
    #[serde(with = "nested_rows")]
    pub w_raw: DMatrix<f64>,
    pub dag: Dag,
    pub h_final: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub trace: Vec<TraceEntry>,
    /// Edges dropped to break cycles left after thresholding.
    pub cycle_edges_removed: usize,
    /// Vertices whose refit design matrix was rank deficient.
    pub rank_deficient_nodes: Vec<usize>,
    pub wall_time: f64,
}

mod nested_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        m.row_iter()
            .map(|r| r.iter().copied().collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]))
    }
}

fn initial_point(p: Parameterization, cfg: &SolverConfig) -> DVector<f64> {
    match p {
        Parameterization::Full { d } => DVector::zeros(d * d),
        Parameterization::Factored { rank, .. } => {
            let sd = cfg.init_scale / (rank as f64).sqrt();
            let normal = Normal::new(0.0, sd).expect("positive sd");
            let mut rng = rng_from_seed(cfg.seed);
            DVector::from_fn(p.len(), |_, _| normal.sample(&mut rng))
        }
    }
}

/// Learns a DAG from `data`.
pub fn fit(data: &Dataset, cfg: &SolverConfig) -> Result<FitResult> {
    let start = Instant::now();
    let d = data.d();
    if data.n() == 0 {
        return Err(Error::InvalidArgument("dataset has no rows".into()));
    }
    cfg.validate(d)?;
    let data = if cfg.center { data.centered() } else { data.clone() };
    let ls = LeastSquares::new(&data);
    let param = match cfg.rank_hat {
        None => Parameterization::Full { d },
        Some(rank) => Parameterization::Factored { d, rank },
    };
    let inner = cfg.lbfgs();

    let mut x = initial_point(param, cfg);
    let mut alpha = cfg.alpha_init;
    let mut rho = cfg.rho_init;
    let mut h = f64::INFINITY;
    let mut trace = Vec::new();

    for _ in 0..cfg.max_outer {
        let mut inner_iters = 0;
        let (x_new, ev_new) = loop {
            let lag = AugmentedLagrangian {
                loss: &ls,
                alpha,
                rho,
                lambda_nuc: cfg.lambda_nuc,
            };
            let out = lbfgs::minimize(
                |v| match param.eval(&lag, v) {
                    Ok((ev, g)) => (ev.value, g),
                    Err(_) => (f64::INFINITY, DVector::zeros(v.len())),
                },
                x.clone(),
                &inner,
            );
            inner_iters += out.iterations;
            let (ev, _) = param.eval(&lag, &out.x)?;
            if ev.h > cfg.c * h && rho < cfg.rho_max {
                rho *= cfg.rho_mult;
            } else {
                break (out.x, ev);
            }
        };
        x = x_new;
        h = ev_new.h;
        alpha += rho * h;
        trace.push(TraceEntry {
            loss: ev_new.loss,
            h,
            rho,
            alpha,
            inner_iters,
        });
        if h < cfg.epsilon || rho >= cfg.rho_max {
            break;
        }
    }

    let w_raw = param.weights(&x);
    let (mut w_star, _) = threshold(&w_raw, cfg.w_threshold)?;
    let cycle_edges_removed = break_cycles(&mut w_star);
    let mut rank_deficient_nodes = Vec::new();
    if cfg.prune {
        let g = WeightedDag::from_matrix(&w_star)?.dag().clone();
        let refit = prune_refit(&data, &g, cfg.w_threshold)?;
        w_star = refit.weighted.matrix()?;
        rank_deficient_nodes = refit.rank_deficient;
    }
    let dag = WeightedDag::from_matrix(&w_star)?.dag().clone();
    debug_assert!(dag.is_acyclic());

    Ok(FitResult {
        w_star,
        w_raw,
        dag,
        h_final: h,
        converged: h < cfg.epsilon,
        outer_iters: trace.len(),
        trace,
        cycle_edges_removed,
        rank_deficient_nodes,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Zeroes entries with `|W(i, j)| <= w` and the diagonal; returns the masked
/// matrix and its support graph.
pub fn threshold(w: &DMatrix<f64>, thresh: f64) -> Result<(DMatrix<f64>, Dag)> {
    if !(thresh > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {thresh}")));
    }
    if !w.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    let mut out = w.clone();
    for ((i, j), x) in out.iter_mut().enumerate().map(|(k, x)| ((k % w.nrows(), k / w.nrows()), x)) {
        if i == j || x.abs() <= thresh {
            *x = 0.0;
        }
    }
    let g = WeightedDag::from_matrix(&out)?.dag().clone();
    Ok((out, g))
}

/// Removes the smallest-magnitude edge of some remaining cycle until the
/// support is acyclic. Returns the number of edges removed.
fn break_cycles(w: &mut DMatrix<f64>) -> usize {
    let mut removed = 0;
    loop {
        let g = WeightedDag::from_matrix(w).expect("finite").dag().clone();
        let Acyclicity::Cycle(cycle) = validate_acyclic(&g) else {
            return removed;
        };
        let k = cycle.len();
        let (i, j) = (0..k)
            .map(|t| (cycle[t], cycle[(t + 1) % k]))
            .min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()))
            .expect("non-empty cycle");
        w[(i, j)] = 0.0;
        removed += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refit {
    pub weighted: WeightedDag,
    /// Vertices whose parent design matrix was rank deficient; their
    /// coefficients are the minimum-norm least-squares solution.
    pub rank_deficient: Vec<usize>,
}

/// Regresses every column on its parents in `g` (no intercept) and keeps the
/// coefficients with magnitude above `thresh`.
pub fn prune_refit(data: &Dataset, g: &Dag, thresh: f64) -> Result<Refit> {
    if data.d() != g.d() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", g.d()),
            got: data.d().to_string(),
        });
    }
    g.topological_order()?;
    let x = data.matrix();
    let gram = x.transpose() * x;
    let mut coef = DMatrix::zeros(g.d(), g.d());
    let mut rank_deficient = Vec::new();
    for j in 0..g.d() {
        let pa = g.parents(j);
        if pa.is_empty() {
            continue;
        }
        let k = pa.len();
        let a = DMatrix::from_fn(k, k, |r, c| gram[(pa[r], pa[c])]);
        let b = DVector::from_fn(k, |r, _| gram[(pa[r], j)]);
        let svd = crate::linalg::svd(&a)?;
        let smax = svd.s.max();
        let cutoff = smax * 1e-12 * k as f64;
        if svd.s.iter().any(|&s| s <= cutoff) {
            rank_deficient.push(j);
        }
        let beta = svd.solve(&b, cutoff);
        for (r, &p) in pa.iter().enumerate() {
            if beta[r].abs() > thresh {
                coef[(p, j)] = beta[r];
            }
        }
    }
    Ok(Refit {
        weighted: WeightedDag::from_matrix(&coef)?,
        rank_deficient,
    })
}
