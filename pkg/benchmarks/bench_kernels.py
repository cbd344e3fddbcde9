"""Compiled vs pure-Python sampling kernels: wall time and output equality.

    python benchmarks/bench_kernels.py [--scale 1.0]

Each case is run once per backend from identical inputs; the script reports
the time per node update, the speedup and whether the outputs match bit for
bit.
"""
import argparse
import time

import numpy as np

from pbitnqs import kernels
from pbitnqs.model import dbm_topology, frbm_topology, init_params
from pbitnqs.partition import partition_graph, partitioned_chain
from pbitnqs.rng import seed_state
from pbitnqs.sampler import BoltzmannNetwork, new_chain


def case_sweeps(impl, scale):
    theta = init_params(frbm_topology(6, 2), 1, scale=0.3)
    net = BoltzmannNetwork.from_params(theta)
    n_sweeps = int(200 * scale)
    ch = new_chain(net.graph.node_count, seed=3)
    out = np.empty((n_sweeps, net.graph.node_count), np.int8)
    t = time.perf_counter()
    impl.sample_chain(*net.kernel_args(), net.order, ch.spins, ch.rng, 1.0, 0, 1, out)
    return time.perf_counter() - t, n_sweeps * net.graph.node_count, [out, ch.rng]


def case_dual(impl, scale):
    theta = init_params(dbm_topology(3, 1, 1), 2, scale=0.3)
    t_ = theta.topology
    g = t_.graph
    n_s, n_c = 8, int(100 * scale)
    configs = np.tile(new_chain(t_.n_nodes, seed=4).spins, (n_s, 1))
    rng = seed_state(5)
    p, p2 = np.empty((n_s, t_.n_visible)), np.empty((n_s, t_.n_visible))
    oa, oe = np.empty((n_s, t_.n_aux)), np.empty((n_s, t_.n_edges))
    w, b = np.ascontiguousarray(theta.weights), np.ascontiguousarray(theta.bias)
    t = time.perf_counter()
    impl.dual_stats(g.csr_indptr, g.csr_indices, g.csr_edge, w, b, w, b, t_.aux_order, t_.n_visible,
                    g.edge_list, configs, rng, 1.0, n_c, p, p2, oa, oe, 500.0)
    return time.perf_counter() - t, n_s * n_c * t_.n_aux, [p, p2, oa, oe, configs, rng]


def case_stale(impl, scale):
    theta = init_params(frbm_topology(6, 1), 6, scale=0.3)
    net = BoltzmannNetwork.from_params(theta)
    part = partition_graph(net.graph, 3, seed=0)
    ch = partitioned_chain(net.graph.node_count, 3, seed=7)
    rounds, tau = int(50 * scale), 4
    out = np.empty((rounds, net.graph.node_count), np.int8)
    t = time.perf_counter()
    impl.stale_rounds(*net.kernel_args(), net.order, part.part_of, ch.spins, ch.shadow, ch.states,
                      1.0, tau, rounds, out)
    return time.perf_counter() - t, rounds * tau * net.graph.node_count, [out, ch.states]


CASES = [("free sweeps (FRBM L=6 k=2)", case_sweeps),
         ("dual sampling (DBM L=3)", case_dual),
         ("stale rounds (FRBM L=6, P=3)", case_stale)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies the work per case")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels are not built; only the Python backend is available")
    impls = {name: kernels.load_backend(name) for name in backends}
    print(f"{'case':32s} {'backend':9s} {'ns/update':>10s} {'speedup':>8s} {'match':>6s}")
    for label, fn in CASES:
        res = {name: fn(impl, args.scale) for name, impl in impls.items()}
        ref_t = res["python"][0] / res["python"][1]
        for name, (dt, work, outs) in res.items():
            same = all(np.array_equal(a, b) for a, b in zip(outs, res["python"][2]))
            per = dt / work
            print(f"{label:32s} {name:9s} {1e9 * per:10.1f} {ref_t / per:8.1f} {str(same):>6s}")


if __name__ == "__main__":
    main()
