//! Benchmark sweeps.
//!
//! A plan expands into one run per (cell, method, seed). Datasets are drawn
//! once per (graph config, n, noise, seed), stored under `datasets/` by the
//! hash of what determines them, and shared by every method on that cell.
//! Runs execute on a bounded worker pool; each finished row is appended to
//! `results.csv` under a lock, and the file is rewritten in run order when the
//! sweep ends.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use lowrank_dag::graphgen::assign_weights_cfg;
use lowrank_dag::io::{self, fmt_f64, EdgeList};
use lowrank_dag::metrics::{aggregate, AggregateReport};
use lowrank_dag::{fit, simulate_linear, Dag, GenConfig, GraphKind, MetricsReport, Noise, RankGenOutcome, SolverConfig, WeightedDag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{sha256_hex, write_atomic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "lowrank")]
    LowRank,
    #[serde(rename = "lowrank+nuclear")]
    LowRankNuclear,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::LowRank => "lowrank",
            Method::LowRankNuclear => "lowrank+nuclear",
        }
    }
}

fn default_noise() -> Vec<Noise> {
    vec![Noise::Gaussian]
}

fn default_n() -> Vec<usize> {
    vec![3000]
}

fn default_repetitions() -> usize {
    10
}

fn default_lambda_nuc() -> f64 {
    0.1
}

fn default_weight_lo() -> f64 {
    0.5
}

fn default_weight_hi() -> f64 {
    2.0
}

/// Grid of experiment cells. Every list is a grid axis; an empty `d`, `deg`
/// or `methods` list gives an empty sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    #[serde(default)]
    pub kind: GraphKind,
    pub d: Vec<usize>,
    pub deg: Vec<f64>,
    /// True ranks for the rank generator; empty means `ceil(0.1 d)`.
    #[serde(default)]
    pub r: Vec<usize>,
    /// Scale-free exponent.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Factorization widths for the low-rank methods; empty means `r̂ = r`.
    #[serde(default)]
    pub rank_hat: Vec<usize>,
    #[serde(default = "default_noise")]
    pub noise: Vec<Noise>,
    pub methods: Vec<Method>,
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// First seed; repetition `k` uses `seed + k`.
    #[serde(default)]
    pub seed: u64,
    /// Explicit seed list, replacing `seed` and `repetitions`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Nuclear-norm weight for `lowrank+nuclear`.
    #[serde(default = "default_lambda_nuc")]
    pub lambda_nuc: f64,
    #[serde(default = "default_weight_lo")]
    pub weight_lo: f64,
    #[serde(default = "default_weight_hi")]
    pub weight_hi: f64,
}

/// Inputs that determine one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub graph: GenConfig,
    pub n: usize,
    pub noise: Noise,
    pub data_seed: u64,
}

impl DataSpec {
    pub fn key(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable");
        sha256_hex(json.as_bytes())[..16].to_string()
    }
}

/// One fit within a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub id: usize,
    pub seed: u64,
    pub data: DataSpec,
    pub method: Method,
    pub solver: SolverConfig,
}

impl RunSpec {
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            data: &'a DataSpec,
            method: Method,
            solver: &'a SolverConfig,
        }
        let key = Key {
            data: &self.data,
            method: self.method,
            solver: &self.solver,
        };
        sha256_hex(serde_json::to_string(&key).expect("serializable").as_bytes())[..16].to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NotConverged,
    GenFail,
    Error,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::NotConverged => "not_converged",
            RunStatus::GenFail => "gen_fail",
            RunStatus::Error => "error",
        }
    }
}

/// One results row. Metric fields are `None` when no fit was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub seed: u64,
    pub d: usize,
    pub deg: f64,
    pub r: Option<usize>,
    pub r_hat: Option<usize>,
    pub method: Method,
    pub n: usize,
    pub noise: Noise,
    pub shd: Option<usize>,
    pub tpr: Option<f64>,
    pub fdr: Option<f64>,
    pub seconds: Option<f64>,
    pub status: RunStatus,
    pub h_final: Option<f64>,
    pub dag_acyclic: Option<bool>,
    pub edges_true: Option<usize>,
    pub edges_est: Option<usize>,
    pub config_hash: String,
    pub data_key: String,
    /// Hash of the estimated weight matrix and edge list as written to disk.
    pub fit_hash: Option<String>,
    pub message: String,
}

pub const CSV_HEADER: &str = "run_id,seed,d,deg,r,r_hat,method,n,noise,shd,tpr,fdr,seconds,status,h_final,dag_acyclic,edges_true,edges_est,config_hash,data_key,fit_hash,message";

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl RunRow {
    pub fn csv_line(&self) -> String {
        let noise = match self.noise {
            Noise::Gaussian => "gaussian",
            Noise::Exponential => "exponential",
        };
        let message = self.message.replace(['"', '\n', '\r'], " ");
        [
            self.run_id.to_string(),
            self.seed.to_string(),
            self.d.to_string(),
            fmt_f64(self.deg),
            opt(self.r),
            opt(self.r_hat),
            self.method.name().to_string(),
            self.n.to_string(),
            noise.to_string(),
            opt(self.shd),
            opt_f(self.tpr),
            opt_f(self.fdr),
            opt_f(self.seconds),
            self.status.name().to_string(),
            opt_f(self.h_final),
            opt(self.dag_acyclic),
            opt(self.edges_true),
            opt(self.edges_est),
            self.config_hash.clone(),
            self.data_key.clone(),
            opt(self.fit_hash.clone()),
            format!("\"{message}\""),
        ]
        .join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub d: usize,
    pub deg: f64,
    pub r: Option<usize>,
    pub r_hat: Option<usize>,
    pub method: Method,
    pub n: usize,
    pub noise: Noise,
    pub runs: usize,
    /// Runs that produced a fit; aggregates are over these.
    pub fitted: usize,
    pub converged: usize,
    pub metrics: Option<AggregateReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub runs: usize,
    pub status_counts: BTreeMap<String, usize>,
    pub groups: Vec<GroupSummary>,
}

#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub rows: Vec<RunRow>,
    pub summary: BenchSummary,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Stream offset between graph and data seeds.
const DATA_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

impl BenchPlan {
    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repetitions as u64).map(|k| self.seed.wrapping_add(k)).collect(),
        }
    }

    fn ranks(&self, d: usize) -> Vec<Option<usize>> {
        match self.kind {
            GraphKind::Rank if self.r.is_empty() => vec![Some(d.div_ceil(10))],
            GraphKind::Rank => self.r.iter().map(|&r| Some(r)).collect(),
            _ => vec![None],
        }
    }

    /// Expands the grid. Fails if any cell violates a generator or solver
    /// precondition, or if seeds repeat.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        let seeds = self.seed_list();
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            bail!("plan seeds must be distinct");
        }
        if !(self.lambda_nuc >= 0.0) {
            bail!("lambda_nuc must be nonnegative");
        }
        let mut out = Vec::new();
        for &d in &self.d {
            for &deg in &self.deg {
                for r in self.ranks(d) {
                    for &n in &self.n {
                        for &noise in &self.noise {
                            for &seed in &seeds {
                                let graph = GenConfig {
                                    d,
                                    deg,
                                    r,
                                    gamma: self.gamma,
                                    weight_lo: self.weight_lo,
                                    weight_hi: self.weight_hi,
                                    seed,
                                    kind: self.kind,
                                };
                                graph.validate().with_context(|| format!("cell d={d} deg={deg} r={r:?}"))?;
                                if n == 0 {
                                    bail!("n must be positive");
                                }
                                let data = DataSpec {
                                    graph,
                                    n,
                                    noise,
                                    data_seed: seed ^ DATA_STREAM,
                                };
                                for &method in &self.methods {
                                    let widths: Vec<Option<usize>> = match method {
                                        Method::Baseline => vec![None],
                                        _ if !self.rank_hat.is_empty() => {
                                            self.rank_hat.iter().map(|&k| Some(k)).collect()
                                        }
                                        _ => match r {
                                            Some(r) => vec![Some(r)],
                                            None => bail!("low-rank methods on non-rank graphs need rank_hat"),
                                        },
                                    };
                                    for rank_hat in widths {
                                        let solver = SolverConfig {
                                            rank_hat,
                                            lambda_nuc: match method {
                                                Method::LowRankNuclear => self.lambda_nuc,
                                                _ => self.solver.lambda_nuc,
                                            },
                                            seed,
                                            ..self.solver.clone()
                                        };
                                        solver.validate(d).with_context(|| format!("cell d={d} rank_hat={rank_hat:?}"))?;
                                        out.push(RunSpec {
                                            id: out.len(),
                                            seed,
                                            data: data.clone(),
                                            method,
                                            solver,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn dataset_path(cache: &Path, key: &str) -> PathBuf {
    cache.join("datasets").join(format!("{key}.csv"))
}

fn graph_path(cache: &Path, key: &str) -> PathBuf {
    cache.join("graphs").join(format!("{key}.edges"))
}

fn fail_marker(cache: &Path, key: &str) -> PathBuf {
    cache.join("graphs").join(format!("{key}.fail"))
}

/// Draws the graph and dataset for `spec` unless they are already cached.
/// Returns `Ok(false)` when the generator reports FAIL.
pub fn ensure_dataset(spec: &DataSpec, cache: &Path) -> Result<bool> {
    let key = spec.key();
    if dataset_path(cache, &key).exists() && graph_path(cache, &key).exists() {
        return Ok(true);
    }
    if fail_marker(cache, &key).exists() {
        return Ok(false);
    }
    fs::create_dir_all(cache.join("datasets"))?;
    fs::create_dir_all(cache.join("graphs"))?;
    let g = match spec.graph.generate()? {
        RankGenOutcome::Success { dag, .. } => dag,
        RankGenOutcome::Fail { reason, target_edges } => {
            let note = format!("{reason:?} target_edges={target_edges}\n");
            write_atomic(&fail_marker(cache, &key), note.as_bytes())?;
            return Ok(false);
        }
    };
    let w = assign_weights_cfg(&g, &spec.graph)?;
    let ds = simulate_linear(&w, spec.n, spec.noise, spec.data_seed)?;
    let mut buf = Vec::new();
    io::write_weighted_edge_list(&mut buf, &w)?;
    write_atomic(&graph_path(cache, &key), &buf)?;
    buf.clear();
    io::write_dataset(&mut buf, &ds)?;
    write_atomic(&dataset_path(cache, &key), &buf)?;
    Ok(true)
}

fn load_cached(spec: &DataSpec, cache: &Path) -> Result<(Dag, lowrank_dag::Dataset)> {
    let key = spec.key();
    let gf = File::open(graph_path(cache, &key))?;
    let truth = match io::read_edge_list(BufReader::new(gf))? {
        EdgeList::Weighted(w) => w.dag().clone(),
        EdgeList::Binary(g) => g,
    };
    let df = File::open(dataset_path(cache, &key))?;
    Ok((truth, io::read_dataset(BufReader::new(df))?))
}

fn base_row(spec: &RunSpec) -> RunRow {
    RunRow {
        run_id: spec.id,
        seed: spec.seed,
        d: spec.data.graph.d,
        deg: spec.data.graph.deg,
        r: spec.data.graph.r,
        r_hat: spec.solver.rank_hat,
        method: spec.method,
        n: spec.data.n,
        noise: spec.data.noise,
        shd: None,
        tpr: None,
        fdr: None,
        seconds: None,
        status: RunStatus::Error,
        h_final: None,
        dag_acyclic: None,
        edges_true: None,
        edges_est: None,
        config_hash: spec.config_hash(),
        data_key: spec.data.key(),
        fit_hash: None,
        message: String::new(),
    }
}

/// Fits one run against the cached dataset. Never panics or errors: problems
/// are recorded in the row's status and message.
pub fn execute_run(spec: &RunSpec, cache: &Path) -> RunRow {
    let mut row = base_row(spec);
    let res = catch_unwind(AssertUnwindSafe(|| -> Result<()> {
        if !ensure_dataset(&spec.data, cache)? {
            row.status = RunStatus::GenFail;
            row.message = "generator returned FAIL".into();
            return Ok(());
        }
        let (truth, ds) = load_cached(&spec.data, cache)?;
        let res = fit(&ds, &spec.solver)?;
        let m = MetricsReport::compare(&truth, &res.dag, res.wall_time)?;
        let mut bytes = Vec::new();
        io::write_matrix(&mut bytes, &res.w_star)?;
        io::write_weighted_edge_list(&mut bytes, &WeightedDag::from_matrix(&res.w_star)?)?;
        row.shd = Some(m.shd);
        row.tpr = Some(m.tpr);
        row.fdr = Some(m.fdr);
        row.seconds = Some(res.wall_time);
        row.h_final = Some(res.h_final);
        row.dag_acyclic = Some(res.dag.is_acyclic());
        row.edges_true = Some(truth.num_edges());
        row.edges_est = Some(res.dag.num_edges());
        row.fit_hash = Some(sha256_hex(&bytes)[..16].to_string());
        row.status = if res.converged {
            RunStatus::Ok
        } else {
            RunStatus::NotConverged
        };
        if res.cycle_edges_removed > 0 {
            row.message = format!("removed {} cycle edges", res.cycle_edges_removed);
        }
        Ok(())
    }));
    match res {
        Ok(Ok(())) => {}
        Ok(Err(e)) => {
            row.status = RunStatus::Error;
            row.message = format!("{e:#}");
        }
        Err(p) => {
            row.status = RunStatus::Error;
            row.message = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
        }
    }
    row
}

pub fn summarize_rows(rows: &[RunRow]) -> Result<BenchSummary> {
    let mut status_counts = BTreeMap::new();
    for r in rows {
        *status_counts.entry(r.status.name().to_string()).or_insert(0) += 1;
    }
    let mut groups: Vec<GroupSummary> = Vec::new();
    let same = |g: &GroupSummary, r: &RunRow| {
        g.d == r.d
            && g.deg == r.deg
            && g.r == r.r
            && g.r_hat == r.r_hat
            && g.method == r.method
            && g.n == r.n
            && g.noise == r.noise
    };
    let mut members: Vec<Vec<&RunRow>> = Vec::new();
    for r in rows {
        match groups.iter().position(|g| same(g, r)) {
            Some(k) => members[k].push(r),
            None => {
                groups.push(GroupSummary {
                    d: r.d,
                    deg: r.deg,
                    r: r.r,
                    r_hat: r.r_hat,
                    method: r.method,
                    n: r.n,
                    noise: r.noise,
                    runs: 0,
                    fitted: 0,
                    converged: 0,
                    metrics: None,
                });
                members.push(vec![r]);
            }
        }
    }
    for (g, rs) in groups.iter_mut().zip(&members) {
        let reports: Vec<MetricsReport> = rs
            .iter()
            .filter_map(|r| {
                Some(MetricsReport {
                    shd: r.shd?,
                    tpr: r.tpr?,
                    fdr: r.fdr?,
                    wall_time: r.seconds?,
                })
            })
            .collect();
        g.runs = rs.len();
        g.fitted = reports.len();
        g.converged = rs.iter().filter(|r| r.status == RunStatus::Ok).count();
        g.metrics = if reports.is_empty() {
            None
        } else {
            Some(aggregate(&reports)?)
        };
    }
    Ok(BenchSummary {
        runs: rows.len(),
        status_counts,
        groups,
    })
}

/// Runs every cell of `plan` with at most `workers` concurrent fits and
/// writes `results.csv` and `summary.json` under `out`.
pub fn run_plan(plan: &BenchPlan, out: &Path, workers: usize) -> Result<BenchOutcome> {
    let specs = plan.runs()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let results_path = out.join("results.csv");
    let summary_path = out.join("summary.json");
    let mut file = File::create(&results_path)
        .with_context(|| format!("output directory {} is not writable", out.display()))?;
    writeln!(file, "{CSV_HEADER}")?;
    drop(file);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;

    // Draw each distinct dataset once before any fit reads it.
    let mut unique: Vec<&DataSpec> = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &specs {
        if seen.insert(s.data.key()) {
            unique.push(&s.data);
        }
    }
    let gen_errors: Vec<String> = pool.install(|| {
        unique
            .par_iter()
            .filter_map(|d| ensure_dataset(d, out).err().map(|e| format!("{e:#}")))
            .collect()
    });
    for e in &gen_errors {
        eprintln!("dataset generation error: {e}");
    }

    let writer = Mutex::new(
        OpenOptions::new()
            .append(true)
            .open(&results_path)
            .context("reopening results file")?,
    );
    let mut rows: Vec<RunRow> = pool.install(|| {
        specs
            .par_iter()
            .map(|s| {
                let row = execute_run(s, out);
                let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
                if writeln!(w, "{}", row.csv_line()).and_then(|_| w.flush()).is_err() {
                    eprintln!("failed to append run {} to results", row.run_id);
                }
                row
            })
            .collect()
    });
    drop(writer);
    rows.sort_by_key(|r| r.run_id);

    let mut csv = format!("{CSV_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    write_atomic(&results_path, csv.as_bytes())?;
    let summary = summarize_rows(&rows)?;
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_atomic(&summary_path, &json)?;

    Ok(BenchOutcome {
        rows,
        summary,
        results_path,
        summary_path,
    })
}
