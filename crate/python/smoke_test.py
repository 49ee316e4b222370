"""Smoke test for the mmdrl_py extension.

Build and run:
    cargo build --release --offline -p mmdrl-py --features extension-module
    cp target/release/libmmdrl_py.so python/mmdrl_py.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import mmdrl_py as m


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    k = m.Kernel.gaussian(1.0)
    assert close(k(0.0, 1.0), math.exp(-1.0))
    assert str(m.Kernel("unrectified:alpha=1")) == str(m.Kernel.unrectified(1.0))
    try:
        m.Kernel.gaussian(-1.0)
        raise AssertionError("negative bandwidth accepted")
    except ValueError:
        pass

    p = m.DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
    q = m.DiscreteMeasure.dirac(0.5)
    assert close(p.mean(), 0.5)
    assert m.mmd_squared(p, p, k) <= 1e-12
    assert m.mmd(p, q, k) > 0.0

    # Energy distance between two Diracs is 2|x - y| under alpha = 1.
    e = m.Kernel.unrectified(1.0)
    assert close(m.mmd_squared(m.DiscreteMeasure.dirac(0.0), m.DiscreteMeasure.dirac(3.0), e), 6.0)

    g = m.mmd_b_grad([0.0, 1.0], [0.5, 0.5], k)
    assert len(g) == 2 and g[0] < 0.0 < g[1]

    chain = m.build_chain(2)
    assert chain.num_states == 2 and chain.is_terminal(1)
    mc = chain.mc_moments(0, 0, 20000, 2, 7)
    assert abs(mc[0] - 0.8 / 0.91) < 0.05, mc

    table = m.run_policy_evaluation(chain, method="mmd", seed=3)
    est = sum(table.get(0, 0)) / len(table.get(0, 0))
    assert abs(est - 0.8 / 0.91) < 0.1, est
    qt = m.run_policy_evaluation(chain, method="quantile", seed=3)
    assert len(qt.get(0, 0)) == 30

    target = m.discretized_gaussian(50, -4.0, 4.0)
    hk = m.Kernel.gaussian(0.5)
    parts, val = m.optimize_particles(target, 4, hk, seed=1, max_steps=200)
    assert len(parts) == 4 and val >= 0.0
    grid = [-4.0 + 8.0 * i / 400 for i in range(401)]
    gparts, gval = m.greedy_herd(target, 4, hk, grid)
    assert len(gparts) == 4 and gval >= 0.0

    with tempfile.TemporaryDirectory() as out:
        cfg = {"experiment": "counterexample", "seed": 0}
        passed, summary = m.run_experiment(json.dumps(cfg), out)
        assert passed, summary
        assert os.path.exists(os.path.join(out, "counterexample.csv"))

    print("smoke test OK")


if __name__ == "__main__":
    main()
