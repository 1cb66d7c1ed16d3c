//! Text formats.
//!
//! Edge list: a `d=<int>` header line, then one `tail,head[,weight]` row per
//! edge with 0-based indices. Either every row carries a weight or none does.
//!
//! Dense matrix / dataset: one comma-separated row of reals per line, no
//! header. Floats are written with 17 significant digits so that files
//! round-trip exactly and reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Dag, WeightedDag};
use crate::sem::Dataset;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A parsed edge list: weighted when every row had a third column.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeList {
    Binary(Dag),
    Weighted(WeightedDag),
}

impl EdgeList {
    pub fn dag(&self) -> &Dag {
        match self {
            EdgeList::Binary(g) => g,
            EdgeList::Weighted(w) => w.dag(),
        }
    }
}

pub fn write_edge_list<W: Write>(out: &mut W, g: &Dag) -> Result<()> {
    let mut s = format!("d={}\n", g.d());
    for (i, j) in g.edges() {
        writeln!(s, "{i},{j}").expect("write to String");
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_weighted_edge_list<W: Write>(out: &mut W, w: &WeightedDag) -> Result<()> {
    let mut s = format!("d={}\n", w.d());
    for (&(i, j), &x) in w.weights() {
        writeln!(s, "{i},{j},{}", fmt_f64(x)).expect("write to String");
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<EdgeList> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "missing `d=<int>` header"))?;
    let header = header?;
    let d: usize = header
        .trim()
        .strip_prefix("d=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err(ln, format!("expected `d=<int>`, got {header:?}")))?;

    let mut dag = Dag::empty(d);
    let mut weights = BTreeMap::new();
    let mut weighted: Option<bool> = None;
    for (ln, line) in lines {
        let line = line?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(ln, "expected `tail,head[,weight]`"));
        }
        let has_w = fields.len() == 3;
        if *weighted.get_or_insert(has_w) != has_w {
            return Err(parse_err(ln, "mixed weighted and unweighted rows"));
        }
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(ln, format!("bad vertex index {s:?}")))
        };
        let (i, j) = (idx(fields[0])?, idx(fields[1])?);
        dag.add_edge(i, j).map_err(|e| parse_err(ln, e.to_string()))?;
        if has_w {
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| parse_err(ln, format!("bad weight {:?}", fields[2])))?;
            weights.insert((i, j), w);
        }
    }
    if weighted == Some(true) {
        Ok(EdgeList::Weighted(WeightedDag::new(dag, weights)?))
    } else {
        Ok(EdgeList::Binary(dag))
    }
}

pub fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>) -> Result<()> {
    let mut s = String::with_capacity(m.len() * 24);
    for row in m.row_iter() {
        for (k, x) in row.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str(&fmt_f64(*x));
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(k + 1, format!("bad number {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    k + 1,
                    format!("expected {} columns, got {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Square matrix CSV; each nonzero off-diagonal entry becomes an edge.
pub fn read_weight_matrix<R: BufRead>(input: R) -> Result<WeightedDag> {
    WeightedDag::from_matrix(&read_matrix(input)?)
}

pub fn write_dataset<W: Write>(out: &mut W, ds: &Dataset) -> Result<()> {
    write_matrix(out, ds.matrix())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    Dataset::new(read_matrix(input)?)
}
