"""Compare the compiled and numpy collision kernels on the default grid.

    python benchmarks/bench_collision.py --cells 64 --repeat 3
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from acoustic_limit import _backend
from acoustic_limit.collision import KernelSpec, build_tables, collide, entropy_dissipation
from acoustic_limit.velocity_space import build_grid


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--kernel", default="hard-sphere")
    p.add_argument("--n-per-axis", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    grid = build_grid(2, 6.0, args.n_per_axis)
    t0 = time.perf_counter()
    tables = build_tables(KernelSpec(args.kernel), grid)
    t_build = time.perf_counter() - t0
    rng = np.random.default_rng(args.seed)
    G = 1.0 + 0.2 * rng.uniform(-1, 1, (args.cells, grid.K))

    result = {"cells": args.cells, "K": grid.K, "n_triples": tables.n_triples, "table_build_s": t_build,
              "compiled_available": _backend.compiled_available(), "default_backend": _backend.BACKEND}
    outs = {}
    backends = ["numpy"] + (["compiled"] if _backend.compiled_available() else [])
    for b in backends:
        collide(G[:1], tables, b)  # warm caches
        tq, Q = _time(lambda: collide(G, tables, b), args.repeat)
        tr, R = _time(lambda: entropy_dissipation(G, tables, b), args.repeat)
        outs[b] = (Q, R)
        result[b] = {"collide_s": tq, "dissipation_s": tr}
    if len(outs) == 2:
        (Qn, Rn), (Qc, Rc) = outs["numpy"], outs["compiled"]
        result["max_abs_diff_Q"] = float(np.max(np.abs(Qn - Qc)))
        result["max_rel_diff_R"] = float(np.max(np.abs(Rn - Rc) / np.abs(Rc)))
        result["speedup_collide"] = result["numpy"]["collide_s"] / result["compiled"]["collide_s"]
        result["speedup_dissipation"] = result["numpy"]["dissipation_s"] / result["compiled"]["dissipation_s"]
    print(json.dumps(result, indent=2))
    return result


if __name__ == "__main__":
    main()
