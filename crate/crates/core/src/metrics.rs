//! Structure-recovery metrics and outlier-filtered aggregation.
//!
//! SHD counts, per unordered vertex pair, whether the two graphs disagree on
//! that pair. A reversed edge therefore costs 1, as do a missing and an
//! extra edge.
//!
//! Quartiles use linear interpolation between order statistics at position
//! `q (n - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dag;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub shd: usize,
    pub tpr: f64,
    pub fdr: f64,
    pub wall_time: f64,
}

impl MetricsReport {
    pub fn compare(truth: &Dag, est: &Dag, wall_time: f64) -> Result<Self> {
        let (tpr, fdr) = tpr_fdr(truth, est)?;
        Ok(Self {
            shd: shd(truth, est)?,
            tpr,
            fdr,
            wall_time,
        })
    }
}

fn check_same_d(a: &Dag, b: &Dag) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: format!("d = {}", a.d()),
            got: format!("d = {}", b.d()),
        });
    }
    Ok(())
}

pub fn shd(truth: &Dag, est: &Dag) -> Result<usize> {
    check_same_d(truth, est)?;
    let mut pairs: Vec<(usize, usize)> = truth
        .edges()
        .chain(est.edges())
        .map(|(i, j)| (i.min(j), i.max(j)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs
        .into_iter()
        .filter(|&(a, b)| {
            truth.has_edge(a, b) != est.has_edge(a, b) || truth.has_edge(b, a) != est.has_edge(b, a)
        })
        .count())
}

/// How a reversed edge in the estimate is scored by [`tpr_fdr_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReversalPolicy {
    /// Missed for TPR and a false discovery for FDR.
    #[default]
    Strict,
    /// Counted as a true positive.
    Lenient,
}

/// TPR and FDR with reversed edges counted as errors.
pub fn tpr_fdr(truth: &Dag, est: &Dag) -> Result<(f64, f64)> {
    tpr_fdr_with(truth, est, ReversalPolicy::Strict)
}

pub fn tpr_fdr_with(truth: &Dag, est: &Dag, policy: ReversalPolicy) -> Result<(f64, f64)> {
    check_same_d(truth, est)?;
    let tp = est
        .edges()
        .filter(|&(i, j)| {
            truth.has_edge(i, j) || (policy == ReversalPolicy::Lenient && truth.has_edge(j, i))
        })
        .count();
    let tpr = if truth.num_edges() == 0 {
        0.0
    } else {
        tp as f64 / truth.num_edges() as f64
    };
    let fdr = if est.num_edges() == 0 {
        0.0
    } else {
        (est.num_edges() - tp) as f64 / est.num_edges() as f64
    };
    Ok((tpr, fdr))
}

/// Quantile by linear interpolation at position `q (n - 1)` of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Keeps values within `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, preserving order.
pub fn iqr_filter(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("iqr_filter input"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("iqr_filter input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Ok(values
        .iter()
        .copied()
        .filter(|&v| v >= lo && v <= hi)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub median: f64,
    /// Mean after [`iqr_filter`].
    pub iqr_mean: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    let kept = iqr_filter(values)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean,
        std,
        median: quantile(&sorted, 0.5),
        iqr_mean: kept.iter().sum::<f64>() / kept.len() as f64,
        count: values.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub shd: Summary,
    pub tpr: Summary,
    pub fdr: Summary,
    pub wall_time: Summary,
}

pub fn aggregate(runs: &[MetricsReport]) -> Result<AggregateReport> {
    if runs.is_empty() {
        return Err(Error::Empty("aggregate input"));
    }
    let col = |f: fn(&MetricsReport) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    Ok(AggregateReport {
        shd: summarize(&col(|r| r.shd as f64))?,
        tpr: summarize(&col(|r| r.tpr))?,
        fdr: summarize(&col(|r| r.fdr))?,
        wall_time: summarize(&col(|r| r.wall_time))?,
    })
}
