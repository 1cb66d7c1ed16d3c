//! Causal DAG learning under a low-rank assumption on the weighted adjacency
//! matrix.
//!
//! - [`graph`], [`bounds`]: digraph model and graphical rank bounds (levels,
//!   head-tail vertex covers via bipartite matching, numeric rank).
//! - [`graphgen`]: rank-specified, Erdős–Rényi and scale-free DAG generators.
//! - [`sem`]: linear SEM data with Gaussian or exponential noise.
//! - [`solver`]: augmented-Lagrangian fitting with full or factorized weights.
//! - [`metrics`]: SHD / TPR / FDR and IQR-filtered aggregates.
//! - [`io`]: edge-list and CSV formats.

pub mod bounds;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod graphgen;
pub mod io;
pub mod linalg;
pub mod matching;
pub mod metrics;
pub mod sem;
pub mod solver;

pub use bounds::{
    is_head_tail_cover, levels, max_rank, min_head_tail_cover, numeric_rank, rank_bounds,
    rank_lower_bounds, upper_bounds_level, HeadTailCover, LevelDecomposition, LevelUpperBounds,
    RankBounds,
};
pub use error::{Error, Result};
pub use graph::{validate_acyclic, Acyclicity, Dag, Edge, WeightedDag};
pub use graphgen::{GenConfig, GraphKind, RankGenOutcome};
pub use metrics::MetricsReport;
pub use sem::{simulate_linear, Dataset, Noise};
pub use solver::{fit, FitResult, SolverConfig};
