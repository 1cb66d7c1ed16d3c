//! Graphical bounds on the rank of weighted adjacency matrices.
//!
//! For a pattern `A`, every `W` sharing that pattern satisfies
//!
//! ```text
//! l(G) <= sum_s |C(G_{s,s-1})| <= min rank <= rank(W) <= max rank = min head-tail cover
//! ```
//!
//! and the maximum rank is further bounded by the level-based quantities of
//! [`upper_bounds_level`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, WeightedDag};
use crate::matching::{self, Matching};
use crate::linalg;

/// Default relative singular-value threshold for [`numeric_rank`].
pub const NUMERIC_RANK_TOL: f64 = 1e-8;

/// Vertices grouped by the length of the longest directed path leaving them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDecomposition {
    pub level: Vec<usize>,
    /// `groups[s]` holds the vertices at level `s`, ascending.
    pub groups: Vec<Vec<usize>>,
    pub graph_level: usize,
}

pub fn levels(g: &Dag) -> Result<LevelDecomposition> {
    let order = g.topological_order()?;
    let mut level = vec![0usize; g.d()];
    for &v in order.iter().rev() {
        level[v] = g
            .children(v)
            .iter()
            .map(|&c| level[c] + 1)
            .max()
            .unwrap_or(0);
    }
    let graph_level = level.iter().copied().max().unwrap_or(0);
    let mut groups = vec![Vec::new(); if g.d() == 0 { 0 } else { graph_level + 1 }];
    for (v, &l) in level.iter().enumerate() {
        groups[l].push(v);
    }
    Ok(LevelDecomposition {
        level,
        groups,
        graph_level,
    })
}

/// Disjoint-set forest over `0..n`.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Lower bounds `(sum_s |C(G_{s,s-1})|, l(G))`.
///
/// `C(.)` counts non-singleton connected components of the induced subgraph
/// on `V_s ∪ V_{s-1}`, with edges taken as undirected.
pub fn rank_lower_bounds(g: &Dag) -> Result<(usize, usize)> {
    let lv = levels(g)?;
    Ok((component_bound(g, &lv), lv.graph_level))
}

fn component_bound(g: &Dag, lv: &LevelDecomposition) -> usize {
    let mut uf = UnionFind::new(g.d());
    let mut total = 0;
    for s in 1..=lv.graph_level {
        let mut touched = Vec::new();
        for &u in &lv.groups[s] {
            for &c in g.children(u) {
                if lv.level[c] == s - 1 {
                    uf.union(u, c);
                    touched.push(u);
                    touched.push(c);
                }
            }
        }
        let mut roots: Vec<usize> = touched.iter().map(|&v| uf.find(v)).collect();
        roots.sort_unstable();
        roots.dedup();
        total += roots.len();
    }
    total
}

/// Head-tail vertex cover: every edge has its head in `heads` or its tail in
/// `tails`. The two sets may overlap; size counts both.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadTailCover {
    pub heads: Vec<usize>,
    pub tails: Vec<usize>,
}

impl HeadTailCover {
    pub fn new(mut heads: Vec<usize>, mut tails: Vec<usize>) -> Self {
        heads.sort_unstable();
        heads.dedup();
        tails.sort_unstable();
        tails.dedup();
        Self { heads, tails }
    }

    pub fn size(&self) -> usize {
        self.heads.len() + self.tails.len()
    }
}

pub fn is_head_tail_cover(g: &Dag, c: &HeadTailCover) -> Result<bool> {
    let mut in_h = vec![false; g.d()];
    let mut in_t = vec![false; g.d()];
    for &v in &c.heads {
        g.check_vertex(v)?;
        in_h[v] = true;
    }
    for &v in &c.tails {
        g.check_vertex(v)?;
        in_t[v] = true;
    }
    Ok(g.edges().all(|(i, j)| in_h[j] || in_t[i]))
}

/// Maximum matching of the bipartite double cover: left copy = tails,
/// right copy = heads, one edge per graph edge.
pub fn double_cover_matching(g: &Dag) -> Matching {
    matching::hopcroft_karp(g.children_lists(), g.d())
}

/// `max{rank(W)}` over all weightings of the pattern. Valid for any digraph.
pub fn max_rank(g: &Dag) -> usize {
    double_cover_matching(g).size()
}

pub fn min_head_tail_cover(g: &Dag) -> HeadTailCover {
    let m = double_cover_matching(g);
    let (left, right) = matching::koenig_cover(g.children_lists(), &m);
    let tails = (0..g.d()).filter(|&v| left[v]).collect();
    let heads = (0..g.d()).filter(|&v| right[v]).collect();
    HeadTailCover::new(heads, tails)
}

/// Level-based upper bounds on the maximum rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelUpperBounds {
    /// `sum_{s=1}^{l(G)} min(|V_s|, |ch(V_s)|)`
    pub by_children: usize,
    /// `sum_{s=0}^{l(G)-1} min(|V_s|, |pa(V_s)|)`
    pub by_parents: usize,
    /// `|V| - max_s |V_s|`
    pub by_largest_level: usize,
    /// Vertices with at least one child.
    pub non_leaf: usize,
    /// Vertices with at least one parent.
    pub non_root: usize,
}

impl LevelUpperBounds {
    pub fn min(&self) -> usize {
        self.by_children
            .min(self.by_parents)
            .min(self.by_largest_level)
    }
}

pub fn upper_bounds_level(g: &Dag) -> Result<LevelUpperBounds> {
    let lv = levels(g)?;
    Ok(level_upper_bounds(g, &lv))
}

fn level_upper_bounds(g: &Dag, lv: &LevelDecomposition) -> LevelUpperBounds {
    let d = g.d();
    let mut mark = vec![usize::MAX; d];
    let mut by_children = 0;
    let mut by_parents = 0;
    let nl = lv.groups.len();
    for (s, group) in lv.groups.iter().enumerate() {
        if s >= 1 {
            let ch = distinct_neighbours(group, &mut mark, 2 * s, |u| g.children(u));
            by_children += group.len().min(ch);
        }
        if s + 1 < nl {
            let pa = distinct_neighbours(group, &mut mark, 2 * s + 1, |u| g.parents(u));
            by_parents += group.len().min(pa);
        }
    }
    let largest = lv.groups.iter().map(Vec::len).max().unwrap_or(0);
    LevelUpperBounds {
        by_children,
        by_parents,
        by_largest_level: d - largest,
        non_leaf: (0..d).filter(|&v| !g.children(v).is_empty()).count(),
        non_root: (0..d).filter(|&v| !g.parents(v).is_empty()).count(),
    }
}

fn distinct_neighbours<'g>(
    group: &[usize],
    mark: &mut [usize],
    stamp: usize,
    of: impl Fn(usize) -> &'g [usize],
) -> usize {
    let mut n = 0;
    for &u in group {
        for &x in of(u) {
            if mark[x] != stamp {
                mark[x] = stamp;
                n += 1;
            }
        }
    }
    n
}

/// Every graphical rank bound for one DAG.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankBounds {
    pub d: usize,
    pub num_edges: usize,
    pub lower_components: usize,
    pub lower_level: usize,
    pub upper_matching: usize,
    pub upper_level: LevelUpperBounds,
    pub min_cover: HeadTailCover,
    pub levels: LevelDecomposition,
}

impl RankBounds {
    /// Checks `lower_level <= lower_components <= upper_matching <= each level
    /// bound`, and `by_children <= non_leaf`.
    ///
    /// `by_parents <= non_root` is not checked: it fails whenever a level below
    /// the top holds parentless vertices, e.g. `0->3, 1->3` plus an isolated `2`.
    pub fn is_consistent(&self) -> bool {
        let u = &self.upper_level;
        self.lower_level <= self.lower_components
            && self.lower_components <= self.upper_matching
            && self.upper_matching <= u.min().min(u.non_leaf).min(u.non_root)
            && u.by_children <= u.non_leaf
    }
}

pub fn rank_bounds(g: &Dag) -> Result<RankBounds> {
    let lv = levels(g)?;
    Ok(RankBounds {
        d: g.d(),
        num_edges: g.num_edges(),
        lower_components: component_bound(g, &lv),
        lower_level: lv.graph_level,
        upper_matching: max_rank(g),
        upper_level: level_upper_bounds(g, &lv),
        min_cover: min_head_tail_cover(g),
        levels: lv,
    })
}

/// Number of singular values above `tol * sigma_max`. A matrix whose largest
/// singular value is below `1e-9` has rank 0.
pub fn numeric_rank(w: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    if w.is_empty() {
        return Ok(0);
    }
    let sv = linalg::singular_values(w)?;
    let smax = sv.max();
    if smax <= 1e-9 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}

pub fn numeric_rank_weighted(w: &WeightedDag, tol: f64) -> Result<usize> {
    numeric_rank(&w.matrix()?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn path(d: usize) -> Dag {
        Dag::new(d, (0..d - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn star() -> Dag {
        Dag::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn bipartite_3x3() -> Dag {
        Dag::new(6, (0..3).flat_map(|i| (3..6).map(move |j| (i, j)))).unwrap()
    }

    /// Smallest head-tail cover by enumerating all (H, T) pairs.
    fn brute_force_min_cover(g: &Dag) -> usize {
        let d = g.d();
        let mut best = usize::MAX;
        for h in 0u32..(1 << d) {
            for t in 0u32..(1 << d) {
                let size = (h.count_ones() + t.count_ones()) as usize;
                if size >= best {
                    continue;
                }
                if g.edges().all(|(i, j)| h >> j & 1 == 1 || t >> i & 1 == 1) {
                    best = size;
                }
            }
        }
        best
    }

    #[test]
    fn levels_of_path() {
        let lv = levels(&path(3)).unwrap();
        assert_eq!(lv.level, vec![2, 1, 0]);
        assert_eq!(lv.graph_level, 2);
    }

    #[test]
    fn levels_of_edgeless() {
        let lv = levels(&Dag::empty(5)).unwrap();
        assert_eq!(lv.level, vec![0; 5]);
        assert_eq!(lv.graph_level, 0);
        assert_eq!(lv.groups, vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn levels_reject_cycle() {
        let g = Dag::new(2, [(0, 1), (1, 0)]).unwrap();
        assert!(matches!(levels(&g), Err(Error::NotADag(_))));
        assert!(rank_lower_bounds(&g).is_err());
        assert!(upper_bounds_level(&g).is_err());
    }

    #[test]
    fn lower_bounds_examples() {
        assert_eq!(rank_lower_bounds(&path(5)).unwrap(), (4, 4));
        let g = Dag::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(rank_lower_bounds(&g).unwrap(), (2, 1));
    }

    #[test]
    fn max_rank_examples() {
        assert_eq!(max_rank(&Dag::empty(4)), 0);
        assert_eq!(max_rank(&path(5)), 4);
        let g = bipartite_3x3();
        assert_eq!(brute_force_min_cover(&g), 3);
        assert_eq!(max_rank(&g), 3);
    }

    #[test]
    fn max_rank_on_cyclic_graph() {
        // 3-cycle: permutation pattern, full rank.
        let g = Dag::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(max_rank(&g), 3);
        assert_eq!(min_head_tail_cover(&g).size(), 3);
    }

    #[test]
    fn min_cover_examples() {
        let c = min_head_tail_cover(&star());
        assert_eq!(c, HeadTailCover::new(vec![], vec![0]));
        assert_eq!(min_head_tail_cover(&path(3)).size(), 2);
    }

    #[test]
    fn is_cover_examples() {
        let g = star();
        assert!(is_head_tail_cover(&g, &HeadTailCover::new((0..4).collect(), vec![])).unwrap());
        let e = Dag::new(2, [(0, 1)]).unwrap();
        assert!(!is_head_tail_cover(&e, &HeadTailCover::new(vec![0], vec![1])).unwrap());
        assert!(is_head_tail_cover(&e, &HeadTailCover::new(vec![9], vec![])).is_err());
    }

    #[test]
    fn level_upper_bounds_examples() {
        let b = upper_bounds_level(&star()).unwrap();
        assert_eq!(b.by_children, 1);
        assert_eq!(b.non_leaf, 1);
        assert_eq!(b.by_largest_level, 1);
        let b = upper_bounds_level(&Dag::empty(4)).unwrap();
        assert_eq!(
            b,
            LevelUpperBounds {
                by_children: 0,
                by_parents: 0,
                by_largest_level: 0,
                non_leaf: 0,
                non_root: 0
            }
        );
    }

    #[test]
    fn parent_sum_can_exceed_non_root_count() {
        let g = Dag::new(4, [(0, 3), (1, 3)]).unwrap();
        let b = upper_bounds_level(&g).unwrap();
        assert_eq!((b.by_parents, b.non_root), (2, 1));
        assert_eq!(max_rank(&g), 1);
        assert!(rank_bounds(&g).unwrap().is_consistent());
    }

    #[test]
    fn numeric_rank_examples() {
        assert_eq!(numeric_rank(&DMatrix::zeros(4, 4), NUMERIC_RANK_TOL).unwrap(), 0);
        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 3.0;
        w[(2, 3)] = -1.0;
        assert_eq!(numeric_rank(&w, NUMERIC_RANK_TOL).unwrap(), 2);
        w[(1, 1)] = f64::NAN;
        assert!(numeric_rank(&w, NUMERIC_RANK_TOL).is_err());
        assert!(numeric_rank(&DMatrix::zeros(2, 2), 0.0).is_err());
    }

    #[test]
    fn running_example() {
        let g = fixtures::running_example();
        let lv = levels(&g).unwrap();
        assert_eq!(
            lv.groups,
            vec![vec![0, 1, 2, 3], vec![4, 5, 6], vec![7, 8], vec![9, 10, 11]]
        );
        assert_eq!(rank_lower_bounds(&g).unwrap(), (4, 3));
        assert_eq!(max_rank(&g), 6);
        assert_eq!(brute_force_min_cover(&g), 6);
        let known_cover = HeadTailCover::new(vec![1, 3, 7], vec![7, 8, 9]);
        assert!(is_head_tail_cover(&g, &known_cover).unwrap());
        let ub = upper_bounds_level(&g).unwrap();
        assert_eq!(ub.by_children, 6);
        assert_eq!(ub.non_leaf, 8);
    }
}
