"""Compare the compiled and pure-Python backends.

Solver: full VSIDS solves of generated 3-SAT instances (both backends must
agree on every statistic).  Graph network: forward+backward on a 3-SAT-like
graph using the fused kernels versus their numpy fallback.

    python benchmarks/bench_kernel.py [--instances 20] [--vars 50]
"""
import argparse
import time

import numpy as np

from qbranch import _gnn_ops_py, gnn_ops
from qbranch import graph_net
from qbranch.cnf import generate_random_3sat
from qbranch.kernel import get_kernel_class
from qbranch.solver import SolverConfig, solve
from qbranch.state_graph import random_bipartite_graph


def bench_solver(formulas, backend):
    t0 = time.perf_counter()
    stats = [solve(f, config=SolverConfig(backend=backend))[1] for f in formulas]
    return time.perf_counter() - t0, stats


def bench_gnn(graph, repeats, ops):
    saved = graph_net.ops
    graph_net.ops = ops
    try:
        params = graph_net.init_params(0)
        q, tape = graph_net.forward(params, graph)
        gq = np.ones_like(q)
        t0 = time.perf_counter()
        for _ in range(repeats):
            q, tape = graph_net.forward(params, graph)
            graph_net.backward(params, tape, gq)
        return (time.perf_counter() - t0) / repeats
    finally:
        graph_net.ops = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--vars", type=int, default=50)
    ap.add_argument("--graph-vars", type=int, default=25)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    formulas = [generate_random_3sat(args.vars, round(4.26 * args.vars), s) for s in range(args.instances)]
    t_py, s_py = bench_solver(formulas, "python")
    print(f"solver python : {t_py:8.3f} s for {len(formulas)} instances")
    try:
        get_kernel_class("cython")
    except ImportError:
        print("solver cython : not built")
    else:
        t_cy, s_cy = bench_solver(formulas, "cython")
        assert s_py == s_cy, "backends disagree"
        print(f"solver cython : {t_cy:8.3f} s  (speed-up {t_py / t_cy:.2f}x, identical stats)")

    g = random_bipartite_graph(args.graph_vars, seed=0)
    t_np = bench_gnn(g, args.repeats, _gnn_ops_py)
    print(f"gnn numpy     : {t_np * 1e3:8.2f} ms per forward+backward "
          f"({g.num_vertices} vertices, {g.num_edges} edges)")
    if gnn_ops.BACKEND == "cython":
        t_fu = bench_gnn(g, args.repeats, gnn_ops)
        print(f"gnn fused     : {t_fu * 1e3:8.2f} ms  (speed-up {t_np / t_fu:.2f}x)")
    else:
        print("gnn fused     : not built")


if __name__ == "__main__":
    main()
