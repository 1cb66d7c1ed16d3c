//! Linear structural equation model simulation.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedDag;
use crate::graphgen::{rng_from_seed, SimRng};

/// `n x d` observations; column `j` is variable `X_{j+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.x
    }

    /// Column means subtracted.
    pub fn centered(&self) -> Self {
        let mut x = self.x.clone();
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        Self { x }
    }

    /// Zero mean, unit (population) variance per column. Constant columns
    /// are only centered.
    pub fn standardized(&self) -> Self {
        let mut out = self.centered();
        let n = out.n().max(1) as f64;
        for mut col in out.x.column_iter_mut() {
            let sd = (col.norm_squared() / n).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    /// Standard normal.
    #[default]
    Gaussian,
    /// Standard exponential, `Exp(1)`, not centered.
    Exponential,
}

impl Noise {
    fn sample(self, rng: &mut SimRng) -> f64 {
        match self {
            Noise::Gaussian => StandardNormal.sample(rng),
            Noise::Exponential => Exp1.sample(rng),
        }
    }
}

/// `X_i = sum_{j in pa(i)} W(j, i) X_j + e_i`, generated in topological order.
///
/// Noise is drawn column by column in the order vertices are visited, so a
/// seed determines the dataset exactly.
pub fn simulate_linear(w: &WeightedDag, n: usize, noise: Noise, seed: u64) -> Result<Dataset> {
    let order = w.dag().topological_order()?;
    simulate_linear_in_order(w, &order, n, noise, seed)
}

/// Same as [`simulate_linear`] with an explicit topological order.
pub fn simulate_linear_in_order(
    w: &WeightedDag,
    order: &[usize],
    n: usize,
    noise: Noise,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let g = w.dag();
    let d = g.d();
    let mut pos = vec![usize::MAX; d];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    if order.len() != d || pos.contains(&usize::MAX) || g.edges().any(|(i, j)| pos[i] >= pos[j]) {
        return Err(Error::InvalidArgument("order is not a topological order".into()));
    }

    let mut rng = rng_from_seed(seed);
    let mut x = DMatrix::<f64>::zeros(n, d);
    for &i in order {
        let mut col: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
        for &j in g.parents(i) {
            let wji = w.weight(j, i).expect("edge weight");
            for (c, &xj) in col.iter_mut().zip(x.column(j).iter()) {
                *c += wji * xj;
            }
        }
        x.column_mut(i).copy_from_slice(&col);
    }
    Dataset::new(x)
}
