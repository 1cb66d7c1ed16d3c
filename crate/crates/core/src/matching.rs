//! Hopcroft–Karp maximum bipartite matching and König vertex covers.
//!
//! Left vertices are `0..adj.len()`, right vertices `0..n_right`; `adj[u]`
//! lists the right neighbours of left vertex `u`.

use std::collections::VecDeque;

const INF: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    /// `left[u] = Some(v)` when `u` is matched to right vertex `v`.
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n_left: usize, n_right: usize) -> Self {
        Self {
            left: vec![None; n_left],
            right: vec![None; n_right],
        }
    }

    pub fn size(&self) -> usize {
        self.left.iter().filter(|m| m.is_some()).count()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.left
            .iter()
            .enumerate()
            .filter_map(|(u, m)| m.map(|v| (u, v)))
    }
}

/// Maximum matching from scratch.
pub fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> Matching {
    let mut m = Matching::empty(adj.len(), n_right);
    augment_to_maximum(adj, &mut m);
    m
}

/// Grows `m` (any valid matching of `adj`) into a maximum matching.
/// Returns the number of augmentations performed.
pub fn augment_to_maximum(adj: &[Vec<usize>], m: &mut Matching) -> usize {
    let n_left = adj.len();
    let mut dist = vec![INF; n_left];
    let mut it = vec![0usize; n_left];
    let mut stack: Vec<usize> = Vec::new();
    let mut via: Vec<usize> = Vec::new();
    let mut total = 0;

    loop {
        // Layer left vertices by alternating distance from the free ones.
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if m.left[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match m.right[v] {
                    None => found = true,
                    Some(w) if dist[w] == INF => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            return total;
        }

        // Vertex-disjoint shortest augmenting paths, iterative DFS.
        it.iter_mut().for_each(|x| *x = 0);
        for root in 0..n_left {
            if m.left[root].is_some() || dist[root] != 0 {
                continue;
            }
            stack.clear();
            via.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                if it[u] == adj[u].len() {
                    dist[u] = INF;
                    stack.pop();
                    via.pop();
                    continue;
                }
                let v = adj[u][it[u]];
                it[u] += 1;
                match m.right[v] {
                    None => {
                        via.push(v);
                        for (&a, &b) in stack.iter().zip(via.iter()) {
                            m.left[a] = Some(b);
                            m.right[b] = Some(a);
                        }
                        for &a in &stack {
                            dist[a] = INF;
                        }
                        total += 1;
                        break;
                    }
                    Some(w) if dist[w] != INF && dist[w] == dist[u] + 1 => {
                        via.push(v);
                        stack.push(w);
                    }
                    _ => {}
                }
            }
        }
    }
}

/// Minimum vertex cover from a maximum matching (König).
///
/// Let `Z` be the vertices reachable from unmatched left vertices by
/// alternating paths (non-matching edges left to right, matching edges right
/// to left). The cover is `(L \ Z) ∪ (R ∩ Z)`. Returns membership flags
/// `(left_in_cover, right_in_cover)`.
pub fn koenig_cover(adj: &[Vec<usize>], m: &Matching) -> (Vec<bool>, Vec<bool>) {
    let n_left = adj.len();
    let n_right = m.right.len();
    let mut left_z = vec![false; n_left];
    let mut right_z = vec![false; n_right];
    let mut queue: VecDeque<usize> = (0..n_left).filter(|&u| m.left[u].is_none()).collect();
    for &u in &queue {
        left_z[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if right_z[v] || m.left[u] == Some(v) {
                continue;
            }
            right_z[v] = true;
            if let Some(w) = m.right[v] {
                if !left_z[w] {
                    left_z[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    (left_z.iter().map(|&z| !z).collect(), right_z)
}
