import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pbitnqs.lattice import SparseGraph
from pbitnqs.model import FRBM, dbm_topology, dense_topology, frbm_topology
from pbitnqs.oracle import boltzmann_table, exact_distribution
from pbitnqs.partition import (PartitionError, partition_graph, partitioned_chain, read_partition, scan_csv,
                               size_bounds, stale_samples, stale_sweep, staleness_bias_scan)
from pbitnqs.sampler import BoltzmannNetwork, empirical_distribution, new_chain, sample_states

from conftest import random_params


def path(n):
    return SparseGraph(n, [(i, i + 1) for i in range(n - 1)])


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    return SparseGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p])


def tv(p, q):
    return 0.5 * np.abs(p - q).sum()


def test_single_partition_has_no_cut():
    part = partition_graph(frbm_topology(3, 1).graph, 1)
    assert len(part.cut_edges) == 0 and part.cut_fraction == 0.0 and part.exchange_bits == 0


def test_path_bisection_cuts_one_edge():
    part = partition_graph(path(4), 2)
    assert len(part.cut_edges) == 1
    assert sorted(part.sizes) == [2, 2]
    assert part.exchange_bits == 2


def test_large_lattice_cut_is_small():
    g = frbm_topology(50, 2).graph
    part = partition_graph(g, 6)
    assert part.cut_fraction <= 0.15
    lo, hi = size_bounds(g.node_count, 6)
    assert part.sizes.min() >= lo and part.sizes.max() <= hi


@settings(max_examples=20)
@given(st.integers(4, 40), st.floats(0.1, 0.6), st.integers(1, 4), st.integers(0, 2**16))
def test_partition_invariants(n, p, P, seed):
    g = random_graph(n, p, seed)
    try:
        size_bounds(n, P)
    except PartitionError:
        assume(False)
    part = partition_graph(g, P, seed=seed)
    assert part.sizes.sum() == n
    lo, hi = size_bounds(n, P)
    assert part.sizes.min() >= lo and part.sizes.max() <= hi
    e = g.edge_list
    brute = [k for k in range(g.edge_count) if part.part_of[e[k, 0]] != part.part_of[e[k, 1]]]
    assert part.cut_edges.tolist() == brute
    ends = {int(x) for k in brute for x in e[k]}
    assert part.exchange_bits == len(ends)
    assert partition_graph(g, P, seed=seed).part_of.tolist() == part.part_of.tolist()


def test_infeasible_requests_raise():
    with pytest.raises(PartitionError):
        partition_graph(path(3), 4)
    with pytest.raises(PartitionError):
        partition_graph(path(4), 0)
    with pytest.raises(PartitionError):
        size_bounds(7, 3, imbalance=0.0)


def test_dump_round_trip():
    g = dbm_topology(4, 1, 1).graph
    part = partition_graph(g, 3, seed=2)
    text = part.to_text()
    assert text.splitlines()[0].split()[0] == "0"
    back = read_partition(text, g)
    assert back.part_of.tolist() == part.part_of.tolist()
    assert back.cut_edges.tolist() == part.cut_edges.tolist()
    with pytest.raises(PartitionError):
        read_partition("0 0\n", g)


def test_single_partition_matches_plain_sampling():
    th = random_params(dbm_topology(3, 1, 1), np.random.default_rng(0), 0.5)
    net = BoltzmannNetwork.from_params(th)
    part = partition_graph(net.graph, 1)
    a = stale_samples(net, part, 1, 300, seed=5)
    b = sample_states(new_chain(net.graph.node_count, seed=5), net, 300)
    assert np.array_equal(a, b)


def test_tau_must_be_positive():
    net = BoltzmannNetwork(path(4), np.zeros(4), np.zeros(3))
    part = partition_graph(net.graph, 2)
    with pytest.raises(ValueError):
        stale_sweep(partitioned_chain(4, 2, seed=0), part, net, 0)
    with pytest.raises(ValueError):
        stale_sweep(partitioned_chain(4, 3, seed=0), part, net, 1)


def test_uncoupled_parts_sample_exactly():
    # zero weights across the cut: each part is an exact independent chain
    rng = np.random.default_rng(1)
    g = random_graph(8, 0.6, 3)
    part = partition_graph(g, 2, seed=0)
    w = rng.uniform(-1, 1, g.edge_count)
    w[part.cut_edges] = 0.0
    net = BoltzmannNetwork(g, rng.uniform(-1, 1, 8), w)
    S = stale_samples(net, part, 4, 200_000, seed=2, burn_in=50)
    assert tv(empirical_distribution(S), boltzmann_table(net)) <= 0.02


@pytest.mark.parametrize("seed", range(3))
def test_short_staleness_stays_close_to_boltzmann(seed):
    th = random_params(dense_topology(FRBM, 4, 4), np.random.default_rng(seed), 0.5)
    net = BoltzmannNetwork.from_params(th)
    part = partition_graph(net.graph, 2, seed=0)
    assert len(part.cut_edges) > 0
    S = stale_samples(net, part, 1, 10**6, seed=3, burn_in=50)
    _, P, _ = exact_distribution(th)
    assert tv(empirical_distribution(S[:, :4]), P) <= 0.03


def test_live_mode_is_exact_gibbs():
    rng = np.random.default_rng(5)
    g = random_graph(6, 0.7, 6)
    part = partition_graph(g, 3, seed=1)
    net = BoltzmannNetwork(g, rng.uniform(-1, 1, 6), rng.uniform(-1, 1, g.edge_count))
    S = stale_samples(net, part, 2, 200_000, seed=4, burn_in=50, live=True)
    assert tv(empirical_distribution(S), boltzmann_table(net)) <= 0.02


def test_scan_zero_cut_gives_zero_deviation():
    th = random_params(dbm_topology(3, 1, 1), np.random.default_rng(6), 0.5)
    net = BoltzmannNetwork.from_params(th)
    rows = staleness_bias_scan(net, partition_graph(net.graph, 1), [1, 2, 4], 2000, bins=10)
    assert [r[0] for r in rows] == [1, 2, 4]
    assert all(r[1] == 0.0 and r[2] == 0.0 for r in rows)
    text = scan_csv(rows)
    assert text.splitlines()[0] == "tau,deviation,stderr" and len(text.splitlines()) == 4


def test_scan_is_reproducible():
    th = random_params(dbm_topology(3, 1, 1), np.random.default_rng(7), 0.5)
    net = BoltzmannNetwork.from_params(th)
    part = partition_graph(net.graph, 2)
    a = staleness_bias_scan(net, part, [1, 8], 4000, seed=1, bins=10)
    b = staleness_bias_scan(net, part, [1, 8], 4000, seed=1, bins=10)
    assert a == b and a[1][2] > 0.0
