use lowrank_dag::solver::acyclicity_h;
use lowrank_dag::Dag;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OFF_DIAGONAL: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

/// Acyclic iff some ordering of the three nodes has every edge pointing forward.
fn acyclic_by_orderings(edges: &[(usize, usize)]) -> bool {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms.iter().any(|p| {
        let pos = |v: usize| p.iter().position(|&x| x == v).unwrap();
        edges.iter().all(|&(a, b)| pos(a) < pos(b))
    })
}

#[test]
fn h_vanishes_exactly_on_acyclic_supports() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut acyclic = 0;
    for mask in 0u32..64 {
        let edges: Vec<_> = (0..6).filter(|k| mask >> k & 1 == 1).map(|k| OFF_DIAGONAL[k]).collect();
        let expect = acyclic_by_orderings(&edges);
        assert_eq!(Dag::new(3, edges.clone()).unwrap().is_acyclic(), expect);
        for _ in 0..5 {
            let mut w = DMatrix::zeros(3, 3);
            for &(a, b) in &edges {
                let mag = rng.random_range(0.5..2.0);
                w[(a, b)] = if rng.random_bool(0.5) { mag } else { -mag };
            }
            let (h, _) = acyclicity_h(&w).unwrap();
            assert_eq!(h < 1e-8, expect, "mask {mask:06b}: h = {h}");
        }
        acyclic += expect as usize;
    }
    // Labeled acyclic digraphs on three nodes.
    assert_eq!(acyclic, 25);
}
