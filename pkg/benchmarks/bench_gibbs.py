"""Throughput of the conclique sweep kernels.

Runs the same Gibbs chain through the compiled kernel and the numpy
fallback, checks that the outputs agree bit for bit, and reports site
updates per second for each backend.

    python3 benchmarks/bench_gibbs.py --size 80x80 --iterations 2000
"""

import argparse
import time

import numpy as np

from haarfield import _car_np, mrf

try:
    from haarfield import _car
except ImportError:
    _car = None


def run_chain(update, graph, spec, iterations, seed):
    """mrf.gibbs_run with the sweep kernel passed in explicitly."""
    V, p = graph.n_sites, spec.components
    L = spec.innovation_factor()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    state = np.empty((V + 1, p))
    state[V] = spec.alpha
    state[:V] = spec.alpha + rng.standard_normal((V, p)) @ L.T
    nbr = graph.neighbor_array()
    order = mrf.conclique_cover(graph).sites_by_color()
    t0 = time.perf_counter()
    for _ in range(iterations):
        eps = rng.standard_normal((V, p))
        innov = eps @ L.T
        for sites in order:
            update(state, nbr, sites, spec.eta, spec.alpha, innov)
    elapsed = time.perf_counter() - t0
    return state[:V].copy(), elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", default="80x80")
    ap.add_argument("--eta", type=float, default=0.24)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--components", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    dims = args.size.lower().split("x")
    dims = (int(dims[0]), int(dims[-1]))
    graph = mrf.LatticeGraph(dims, "free")
    spec = mrf.CarSpec(eta=args.eta, components=args.components)
    updates = graph.n_sites * args.iterations * args.components

    out_np, t_np = run_chain(_car_np.conclique_update, graph, spec,
                             args.iterations, args.seed)
    print("numpy : %6.2fs  %8.2e site-updates/s" % (t_np, updates / t_np))
    if _car is None:
        print("cython: extension not built (pip install -e . to compile)")
        return
    out_c, t_c = run_chain(_car.conclique_update, graph, spec,
                           args.iterations, args.seed)
    print("cython: %6.2fs  %8.2e site-updates/s  (%.2fx)"
          % (t_c, updates / t_c, t_np / t_c))
    print("outputs identical:", np.array_equal(out_np, out_c))


if __name__ == "__main__":
    main()
