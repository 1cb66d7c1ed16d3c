use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lowrank_dag::bounds::{numeric_rank_weighted, NUMERIC_RANK_TOL};
use lowrank_dag::graphgen::assign_weights_cfg;
use lowrank_dag::io::{self, EdgeList};
use lowrank_dag::{fit, rank_bounds, simulate_linear, GenConfig, GraphKind, Noise, RankGenOutcome, SolverConfig, WeightedDag};
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchPlan};
use crate::{load_json, write_atomic, EXIT_FAIL, EXIT_OK, WORKERS_ENV};

#[derive(Parser, Debug)]
#[command(name = "lrdag", version, about = "Low-rank causal DAG learning toolkit")]
pub struct Cli {
    /// RNG seed; overrides any seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (gen, simulate, bounds) or directory (fit, bench).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config: a file path, or inline JSON starting with `{`.
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a random weighted DAG and write it as an edge list.
    Gen(GenArgs),
    /// Simulate linear SEM data from a weighted graph.
    Simulate(SimulateArgs),
    /// Learn a DAG from a dataset.
    Fit(FitArgs),
    /// Print every graphical rank bound for a graph.
    Bounds(BoundsArgs),
    /// Run a benchmark plan.
    Bench,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Rank,
    Er,
    Sf,
}

impl From<KindArg> for GraphKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Rank => GraphKind::Rank,
            KindArg::Er => GraphKind::Er,
            KindArg::Sf => GraphKind::Sf,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Exponential,
}

impl From<NoiseArg> for Noise {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => Noise::Gaussian,
            NoiseArg::Exponential => Noise::Exponential,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub deg: Option<f64>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub weight_lo: Option<f64>,
    #[arg(long)]
    pub weight_hi: Option<f64>,
    /// Write the structure only, without weights.
    #[arg(long)]
    pub unweighted: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Weighted edge list or dense weight-matrix CSV.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Rescale every column to zero mean and unit variance.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Dataset CSV, one sample per row, no header.
    #[arg(long)]
    pub data: PathBuf,
    /// Factorization width; omit for the full-matrix baseline.
    #[arg(long)]
    pub rank_hat: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    /// Edge list or dense weight-matrix CSV.
    #[arg(long)]
    pub graph: PathBuf,
}

/// `simulate` config keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub noise: Noise,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 3000,
            noise: Noise::Gaussian,
            seed: 0,
            standardize: false,
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Bounds(a) => cmd_bounds(cli, a),
        Command::Bench => cmd_bench(cli),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

pub fn gen_config(cli: &Cli, a: &GenArgs) -> Result<GenConfig> {
    let mut cfg = match &cli.config {
        Some(c) => load_json::<GenConfig>(c)?,
        None => {
            let (Some(d), Some(deg)) = (a.d, a.deg) else {
                bail!("gen needs --d and --deg, or --config");
            };
            GenConfig::new(a.kind.map_or(GraphKind::Rank, Into::into), d, deg, 0)
        }
    };
    if let Some(k) = a.kind {
        cfg.kind = k.into();
    }
    cfg.d = a.d.unwrap_or(cfg.d);
    cfg.deg = a.deg.unwrap_or(cfg.deg);
    cfg.r = a.r.or(cfg.r);
    cfg.gamma = a.gamma.or(cfg.gamma);
    cfg.weight_lo = a.weight_lo.unwrap_or(cfg.weight_lo);
    cfg.weight_hi = a.weight_hi.unwrap_or(cfg.weight_hi);
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<i32> {
    let cfg = gen_config(cli, a)?;
    let g = match cfg.generate()? {
        RankGenOutcome::Success { dag, .. } => dag,
        RankGenOutcome::Fail { reason, target_edges } => {
            eprintln!("FAIL: {reason:?} (sampled edge count {target_edges})");
            return Ok(EXIT_FAIL);
        }
    };
    let mut buf = Vec::new();
    if a.unweighted {
        io::write_edge_list(&mut buf, &g)?;
    } else {
        io::write_weighted_edge_list(&mut buf, &assign_weights_cfg(&g, &cfg)?)?;
    }
    emit(cli.out.as_deref(), &buf)?;
    Ok(EXIT_OK)
}

/// Reads an edge list (detected by its `d=` header) or a dense matrix CSV.
pub fn read_graph(path: &Path) -> Result<EdgeList> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let parsed = if first.starts_with("d=") {
        io::read_edge_list(text.as_bytes())
    } else {
        io::read_weight_matrix(text.as_bytes()).map(EdgeList::Weighted)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(c) => load_json::<SimConfig>(c)?,
        None => SimConfig::default(),
    };
    cfg.n = a.n.unwrap_or(cfg.n);
    if let Some(noise) = a.noise {
        cfg.noise = noise.into();
    }
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.standardize |= a.standardize;
    let w: WeightedDag = match read_graph(&a.graph)? {
        EdgeList::Weighted(w) => w,
        EdgeList::Binary(_) => bail!("{} has no weights; simulate needs a weighted graph", a.graph.display()),
    };
    let mut ds = simulate_linear(&w, cfg.n, cfg.noise, cfg.seed)?;
    if cfg.standardize {
        ds = ds.standardized();
    }
    let mut buf = Vec::new();
    io::write_dataset(&mut buf, &ds)?;
    emit(cli.out.as_deref(), &buf)?;
    Ok(EXIT_OK)
}

pub fn solver_config(cli: &Cli, rank_hat: Option<usize>) -> Result<SolverConfig> {
    let mut cfg = match &cli.config {
        Some(c) => load_json::<SolverConfig>(c)?,
        None => SolverConfig::default(),
    };
    cfg.rank_hat = rank_hat.or(cfg.rank_hat);
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    Ok(cfg)
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<i32> {
    let Some(out) = &cli.out else {
        bail!("fit needs --out <dir>");
    };
    let cfg = solver_config(cli, a.rank_hat)?;
    let file = fs::File::open(&a.data).with_context(|| format!("opening {}", a.data.display()))?;
    let ds = io::read_dataset(BufReader::new(file)).with_context(|| format!("parsing {}", a.data.display()))?;
    cfg.validate(ds.d())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let res = fit(&ds, &cfg)?;
    let mut json = serde_json::to_vec_pretty(&res)?;
    json.push(b'\n');
    write_atomic(&out.join("fit.json"), &json)?;
    let mut edges = Vec::new();
    io::write_weighted_edge_list(&mut edges, &WeightedDag::from_matrix(&res.w_star)?)?;
    write_atomic(&out.join("dag.edges"), &edges)?;

    if !res.converged {
        eprintln!(
            "not converged: h = {:e} after {} outer iterations",
            res.h_final, res.outer_iters
        );
        return Ok(EXIT_FAIL);
    }
    Ok(EXIT_OK)
}

fn cmd_bounds(cli: &Cli, a: &BoundsArgs) -> Result<i32> {
    let graph = read_graph(&a.graph)?;
    let mut v = serde_json::to_value(rank_bounds(graph.dag())?)?;
    let numeric = match &graph {
        EdgeList::Weighted(w) => Some(numeric_rank_weighted(w, NUMERIC_RANK_TOL)?),
        EdgeList::Binary(_) => None,
    };
    v["numeric_rank"] = serde_json::json!(numeric);
    let mut buf = serde_json::to_vec_pretty(&v)?;
    buf.push(b'\n');
    emit(cli.out.as_deref(), &buf)?;
    Ok(EXIT_OK)
}

/// Worker cap from the environment, defaulting to the available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("{WORKERS_ENV} must be a positive integer, got {s:?}"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn cmd_bench(cli: &Cli) -> Result<i32> {
    let Some(c) = &cli.config else {
        bail!("bench needs --config <plan.json>");
    };
    let Some(out) = &cli.out else {
        bail!("bench needs --out <dir>");
    };
    let mut plan: BenchPlan = load_json(c)?;
    if let Some(s) = cli.seed {
        plan.seed = s;
    }
    let outcome = bench::run_plan(&plan, out, worker_count()?)?;
    eprintln!(
        "{} runs; results in {}",
        outcome.rows.len(),
        outcome.results_path.display()
    );
    Ok(EXIT_OK)
}
