//! Small reference graphs used by tests, the CLI and the Python smoke test.

use crate::graph::Dag;

/// Twelve-vertex, three-level DAG (vertices `X1..X12` as `0..11`).
///
/// Levels: `{X1..X4}`, `{X5, X6, X7}`, `{X8, X9}`, `{X10, X11, X12}`.
/// Minimum and maximum rank are both 6; `({X2, X4, X8}, {X8, X9, X10})` is a
/// minimum head-tail cover. Rows `X5`/`X6` and `X11`/`X12` share their
/// support, and `X10 -> X1` is the only edge into `X1` from rows `X6..X10`.
pub fn running_example() -> Dag {
    const EDGES: [(usize, usize); 13] = [
        (5, 2),
        (6, 2),
        (7, 4),
        (8, 7),
        (8, 3),
        (8, 6),
        (9, 7),
        (9, 5),
        (9, 2),
        (10, 8),
        (10, 1),
        (11, 8),
        (12, 8),
    ];
    Dag::new_acyclic(12, EDGES.iter().map(|&(i, j)| (i - 1, j - 1)))
        .expect("fixture is acyclic")
}

/// Hub `X1` pointing at three children.
pub fn star() -> Dag {
    Dag::new(4, [(0, 1), (0, 2), (0, 3)]).expect("valid")
}
