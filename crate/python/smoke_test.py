"""Smoke test for the Python bindings.

Build first with `cargo build --release -p lowrank-dag-py`. The shared
library is copied to a temporary directory under the module's import name.
"""

import importlib
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "liblowrank_dag_py.so"
        if lib.exists():
            break
    else:
        sys.exit("build the bindings first: cargo build --release -p lowrank-dag-py")
    tmp = Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "lowrank_dag_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("lowrank_dag_py")


def main():
    ld = load_module()

    star = ld.Dag(4, [(0, 1), (0, 2), (0, 3)])
    assert star.max_rank() == 1
    bounds = star.rank_bounds()
    assert bounds["upper_matching"] == 1 and bounds["non_leaf"] == 1

    try:
        ld.Dag(2, [(0, 1), (1, 0)])
    except ValueError:
        pass
    else:
        raise AssertionError("cyclic graph accepted")

    assert ld.generate("rank", 10, 9.0, r=1, seed=3) is None
    dag, weights = ld.generate("rank", 30, 3.0, r=3, seed=7)
    assert dag.max_rank() == 3
    assert ld.numeric_rank(weights) == 3

    chain = [[0.0, 1.5], [0.0, 0.0]]
    data = ld.simulate(chain, 1000, seed=5)
    assert len(data) == 1000 and len(data[0]) == 2

    res = ld.fit(data)
    assert res["converged"]
    assert res["dag"].edges() == [(0, 1)]
    assert abs(res["w_star"][0][1] - 1.5) < 0.1
    truth = ld.Dag(2, [(0, 1)])
    assert ld.compare(truth, res["dag"])["shd"] == 0

    print("python bindings ok")


if __name__ == "__main__":
    main()
