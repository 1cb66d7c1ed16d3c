//! Directed graph data model.
//!
//! A [`Dag`] is a binary adjacency pattern `A` over `d` vertices; a
//! [`WeightedDag`] attaches a nonzero real weight to every edge, i.e. it is a
//! member of the set of weighted adjacency matrices `W` with
//! `W(i, j) != 0` exactly when `i -> j` is an edge.
//!
//! `Dag` does not enforce acyclicity on its own: the matching-based rank
//! bounds are valid for arbitrary digraphs. Use [`Dag::new_acyclic`] or
//! [`validate_acyclic`] when a topological order is required.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed edge `(tail, head)`, 0-based.
pub type Edge = (usize, usize);

/// Default cap on `d` for dense `d x d` materialization.
pub const DENSE_CAP: usize = 5000;

/// Row-major adjacency bitset, one row of `u64` words per tail vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
struct AdjacencyBits {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl AdjacencyBits {
    fn new(d: usize) -> Self {
        let words_per_row = d.div_ceil(64);
        Self {
            words_per_row,
            bits: vec![0; words_per_row * d],
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words_per_row + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words_per_row + j / 64] |= 1 << (j % 64);
    }
}

/// Directed graph over vertices `0..d` without self-loops or parallel edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    d: usize,
    edges: BTreeSet<Edge>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    adj: AdjacencyBits,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    d: usize,
    edges: Vec<Edge>,
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;
    fn try_from(r: DagRepr) -> Result<Self> {
        Dag::new(r.d, r.edges)
    }
}

impl From<Dag> for DagRepr {
    fn from(g: Dag) -> Self {
        DagRepr {
            d: g.d,
            edges: g.edges.into_iter().collect(),
        }
    }
}

impl Dag {
    /// Graph with `d` vertices and no edges.
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            edges: BTreeSet::new(),
            children: vec![Vec::new(); d],
            parents: vec![Vec::new(); d],
            adj: AdjacencyBits::new(d),
        }
    }

    /// Builds a digraph, rejecting self-loops, duplicates and out-of-range ids.
    /// Cycles are allowed.
    pub fn new(d: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Self::empty(d);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Like [`Dag::new`] but fails with [`Error::NotADag`] on a cycle.
    pub fn new_acyclic(d: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let g = Self::new(d, edges)?;
        g.topological_order()?;
        Ok(g)
    }

    pub fn add_edge(&mut self, tail: usize, head: usize) -> Result<()> {
        self.check_vertex(tail)?;
        self.check_vertex(head)?;
        if tail == head {
            return Err(Error::SelfLoop(tail));
        }
        if !self.edges.insert((tail, head)) {
            return Err(Error::DuplicateEdge(tail, head));
        }
        let c = &mut self.children[tail];
        let pos = c.partition_point(|&x| x < head);
        c.insert(pos, head);
        let p = &mut self.parents[head];
        let pos = p.partition_point(|&x| x < tail);
        p.insert(pos, tail);
        self.adj.set(tail, head);
        Ok(())
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.d {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, d: self.d })
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in lexicographic `(tail, head)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_set(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    #[inline]
    pub fn has_edge(&self, tail: usize, head: usize) -> bool {
        tail < self.d && head < self.d && self.adj.get(tail, head)
    }

    /// Sorted children of `v`.
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Sorted parents of `v`.
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children_lists(&self) -> &[Vec<usize>] {
        &self.children
    }

    /// Topological order (parents before children) or `NotADag` with a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        match validate_acyclic(self) {
            Acyclicity::Order(o) => Ok(o),
            Acyclicity::Cycle(c) => Err(Error::NotADag(c)),
        }
    }

    pub fn is_acyclic(&self) -> bool {
        matches!(validate_acyclic(self), Acyclicity::Order(_))
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: format!("permutation of length {}", self.d),
                got: perm.len().to_string(),
            });
        }
        Dag::new(self.d, self.edges().map(|(i, j)| (perm[i], perm[j])))
    }

    /// Binary adjacency matrix `A`.
    pub fn adjacency_matrix(&self) -> Result<DMatrix<f64>> {
        check_dense(self.d)?;
        let mut a = DMatrix::zeros(self.d, self.d);
        for (i, j) in self.edges() {
            a[(i, j)] = 1.0;
        }
        Ok(a)
    }
}

fn check_dense(d: usize) -> Result<()> {
    if d > DENSE_CAP {
        Err(Error::TooLarge { d, cap: DENSE_CAP })
    } else {
        Ok(())
    }
}

/// Result of Kahn's algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Acyclicity {
    /// Every edge `(i, j)` has `i` before `j`. Ties are broken by smallest
    /// vertex index, so an edgeless graph yields `0, 1, ..., d-1`.
    Order(Vec<usize>),
    /// Vertices of one directed cycle, in traversal order.
    Cycle(Vec<usize>),
}

pub fn validate_acyclic(g: &Dag) -> Acyclicity {
    let d = g.d();
    let mut indeg: Vec<usize> = (0..d).map(|v| g.parents(v).len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..d).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in g.children(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == d {
        return Acyclicity::Order(order);
    }

    // Every leftover vertex has a leftover parent; walk parents until a repeat.
    let start = (0..d).find(|&v| indeg[v] > 0).expect("leftover vertex");
    let mut seen = vec![usize::MAX; d];
    let mut walk = Vec::new();
    let mut v = start;
    while seen[v] == usize::MAX {
        seen[v] = walk.len();
        walk.push(v);
        v = *g
            .parents(v)
            .iter()
            .find(|&&p| indeg[p] > 0)
            .expect("leftover vertex has a leftover parent");
    }
    let mut cycle = walk.split_off(seen[v]);
    cycle.reverse();
    Acyclicity::Cycle(cycle)
}

/// A [`Dag`] together with a nonzero weight on every edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDag {
    dag: Dag,
    #[serde(with = "weight_list")]
    weights: BTreeMap<Edge, f64>,
}

mod weight_list {
    use super::Edge;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<Edge, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(&(i, j), &w)| (i, j, w))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<Edge, f64>, D::Error> {
        let v: Vec<(usize, usize, f64)> = Vec::deserialize(de)?;
        Ok(v.into_iter().map(|(i, j, w)| ((i, j), w)).collect())
    }
}

impl WeightedDag {
    pub fn new(dag: Dag, weights: BTreeMap<Edge, f64>) -> Result<Self> {
        if weights.len() != dag.num_edges() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} edge weights", dag.num_edges()),
                got: weights.len().to_string(),
            });
        }
        for (&(i, j), &w) in &weights {
            if !dag.has_edge(i, j) {
                return Err(Error::InvalidArgument(format!(
                    "weight given for non-edge {i} -> {j}"
                )));
            }
            if w == 0.0 || !w.is_finite() {
                return Err(Error::InvalidWeight {
                    tail: i,
                    head: j,
                    weight: w,
                });
            }
        }
        Ok(Self { dag, weights })
    }

    /// Support of `w` (entries with `|w| > 0`, diagonal ignored) with its weights.
    pub fn from_matrix(w: &DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", w.nrows(), w.ncols()),
            });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("weight matrix"));
        }
        let d = w.nrows();
        let mut dag = Dag::empty(d);
        let mut weights = BTreeMap::new();
        for i in 0..d {
            for j in 0..d {
                if i != j && w[(i, j)] != 0.0 {
                    dag.add_edge(i, j)?;
                    weights.insert((i, j), w[(i, j)]);
                }
            }
        }
        Ok(Self { dag, weights })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn d(&self) -> usize {
        self.dag.d()
    }

    pub fn weight(&self, tail: usize, head: usize) -> Option<f64> {
        self.weights.get(&(tail, head)).copied()
    }

    pub fn weights(&self) -> &BTreeMap<Edge, f64> {
        &self.weights
    }

    /// Dense `W` with `W(i, j)` the weight of `i -> j` and zero elsewhere.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        check_dense(self.d())?;
        let mut w = DMatrix::zeros(self.d(), self.d());
        for (&(i, j), &x) in &self.weights {
            w[(i, j)] = x;
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_edges() {
        assert!(matches!(Dag::new(3, [(0, 0)]), Err(Error::SelfLoop(0))));
        assert!(matches!(
            Dag::new(3, [(0, 1), (0, 1)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Dag::new(3, [(0, 3)]),
            Err(Error::VertexOutOfRange { vertex: 3, d: 3 })
        ));
    }

    #[test]
    fn kahn_on_path_is_natural_order() {
        let g = Dag::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(validate_acyclic(&g), Acyclicity::Order(vec![0, 1, 2, 3]));
    }

    #[test]
    fn kahn_on_edgeless_is_ascending() {
        let g = Dag::empty(5);
        assert_eq!(validate_acyclic(&g), Acyclicity::Order(vec![0, 1, 2, 3, 4]));
    }

    #[test]
    fn two_cycle_witness() {
        let g = Dag::new(2, [(0, 1), (1, 0)]).unwrap();
        match validate_acyclic(&g) {
            Acyclicity::Cycle(mut c) => {
                c.sort();
                assert_eq!(c, vec![0, 1]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
        assert!(matches!(g.topological_order(), Err(Error::NotADag(_))));
    }

    #[test]
    fn cycle_witness_is_a_real_cycle() {
        // 0 -> 1 -> 2 -> 3 -> 1, plus a tail hanging off the cycle.
        let g = Dag::new(5, [(0, 1), (1, 2), (2, 3), (3, 1), (3, 4)]).unwrap();
        let Acyclicity::Cycle(c) = validate_acyclic(&g) else {
            panic!("expected cycle")
        };
        for k in 0..c.len() {
            assert!(g.has_edge(c[k], c[(k + 1) % c.len()]), "{c:?}");
        }
    }

    #[test]
    fn weighted_dag_rejects_zero_and_missing_weights() {
        let g = Dag::new(2, [(0, 1)]).unwrap();
        assert!(WeightedDag::new(g.clone(), BTreeMap::new()).is_err());
        assert!(WeightedDag::new(g.clone(), BTreeMap::from([((0, 1), 0.0)])).is_err());
        assert!(WeightedDag::new(g.clone(), BTreeMap::from([((1, 0), 1.0)])).is_err());
        let w = WeightedDag::new(g, BTreeMap::from([((0, 1), -2.0)])).unwrap();
        let m = w.matrix().unwrap();
        assert_eq!(m[(0, 1)], -2.0);
        assert_eq!(m[(1, 0)], 0.0);
    }

    #[test]
    fn serde_roundtrip_revalidates() {
        let g = Dag::new(3, [(0, 2), (1, 2)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Dag>(&s).unwrap(), g);
        assert!(serde_json::from_str::<Dag>(r#"{"d":2,"edges":[[0,0]]}"#).is_err());
    }

    #[test]
    fn bitset_spans_word_boundaries() {
        let g = Dag::new(130, [(0, 129), (129, 64), (64, 63)]).unwrap();
        assert!(g.has_edge(0, 129) && g.has_edge(129, 64) && g.has_edge(64, 63));
        assert!(!g.has_edge(129, 0) && !g.has_edge(63, 64));
    }
}
