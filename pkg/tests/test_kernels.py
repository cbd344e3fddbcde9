"""The compiled kernels and their pure-Python twins must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbitnqs import kernels
from pbitnqs.estimator import DUAL_CHUNK, dual_stats_batch
from pbitnqs.lattice import SparseGraph
from pbitnqs.model import DBM, FRBM, dense_topology, dbm_topology, quantize
from pbitnqs.partition import partition_graph, partitioned_chain, stale_sweep
from pbitnqs.rng import StreamSplitter, seed_state
from pbitnqs.sampler import BoltzmannNetwork, chromatic_sweep, clamped_sweep, new_chain, sample_states

from conftest import random_params, needs_both_backends

pytestmark = needs_both_backends


def random_network(n, p, seed, scale=2.0, beta=1.0):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return BoltzmannNetwork(SparseGraph(n, edges), rng.uniform(-scale, scale, n),
                            rng.uniform(-scale, scale, len(edges)), beta=beta)


def test_available_backends():
    assert kernels.available_backends() == ["compiled", "python"]
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


@settings(max_examples=25)
@given(st.integers(1, 12), st.floats(0, 1), st.integers(0, 2**32), st.integers(1, 20),
       st.floats(0.1, 3.0))
def test_sweeps_identical(n, p, seed, n_sweeps, beta):
    net = random_network(n, p, seed, beta=beta)
    chains = [new_chain(n, seed=seed, backend=b) for b in ("compiled", "python")]
    for ch, b in zip(chains, ("compiled", "python")):
        chromatic_sweep(ch, net, n_sweeps, backend=b)
    assert np.array_equal(chains[0].spins, chains[1].spins)
    assert np.array_equal(chains[0].rng, chains[1].rng)


@settings(max_examples=20)
@given(st.integers(1, 10), st.integers(0, 2**32), st.integers(0, 5), st.integers(1, 3), st.integers(1, 30))
def test_sample_chain_identical(n, seed, burn, thin, n_samples):
    net = random_network(n, 0.5, seed)
    out = []
    for b in ("compiled", "python"):
        ch = new_chain(n, seed=seed, backend=b)
        out.append((sample_states(ch, net, n_samples, burn, thin, backend=b), ch.rng))
    assert np.array_equal(out[0][0], out[1][0])
    assert np.array_equal(out[0][1], out[1][1])


@settings(max_examples=15)
@given(st.integers(0, 2**32), st.booleans())
def test_clamped_sweep_identical(seed, dbm):
    rng = np.random.default_rng(seed)
    topo = dense_topology(DBM, 3, 3, 2) if dbm else dense_topology(FRBM, 3, 4)
    th = random_params(topo, rng, 2.0)
    v = np.where(rng.random(3) < 0.5, 1, -1)
    res = []
    for b in ("compiled", "python"):
        ch = new_chain(topo.n_nodes, seed=seed, backend=b)
        clamped_sweep(ch, v, th, 3, backend=b)
        res.append(ch)
    assert np.array_equal(res[0].spins, res[1].spins)
    assert np.array_equal(res[0].rng, res[1].rng)


@settings(max_examples=10)
@given(st.integers(0, 2**32), st.integers(2, 12), st.integers(1, DUAL_CHUNK + 5), st.booleans())
def test_dual_stats_identical(seed, n_c, rows, quantized):
    rng = np.random.default_rng(seed)
    th = random_params(dense_topology(DBM, 3, 3, 3), rng, 3.0)
    thq = quantize(th) if quantized else th
    states0 = np.where(rng.random((rows, 9)) < 0.5, 1, -1).astype(np.int8)
    out = []
    for b in ("compiled", "python"):
        states = states0.copy()
        r = dual_stats_batch(states, thq, th, n_c, StreamSplitter(seed_state(seed)), backend=b)
        out.append((r, states))
    (rc, sc), (rp, sp) = out
    for a, b in zip(rc[:4], rp[:4]):
        assert np.array_equal(a, b)
    assert rc[4] == rp[4]
    assert np.array_equal(sc, sp)


def test_dual_stats_clipping_identical():
    rng = np.random.default_rng(0)
    th = random_params(dense_topology(DBM, 2, 2, 2), rng, 1.0)
    th = th.with_theta(th.theta * 400)
    states = np.ones((3, 6), np.int8)
    out = []
    for b in ("compiled", "python"):
        s = states.copy()
        out.append(dual_stats_batch(s, th, th, 4, StreamSplitter(seed_state(1)), backend=b))
    assert out[0][4] == out[1][4] > 0
    assert all(np.array_equal(a, b) for a, b in zip(out[0][:4], out[1][:4]))
    p, p2 = out[0][0], out[0][1]
    assert np.all(np.isfinite(p)) and np.all(np.isfinite(p2))
    assert np.all(p2 >= p * p * (1 - 1e-12))


@settings(max_examples=10)
@given(st.integers(0, 2**32), st.integers(1, 3), st.integers(1, 4), st.integers(1, 6), st.booleans())
def test_stale_rounds_identical(seed, P, tau, rounds, live):
    rng = np.random.default_rng(seed)
    th = random_params(dbm_topology(3, 1, 1), rng, 1.0)
    part = partition_graph(th.topology.graph, P, seed=seed % 7)
    res = []
    for b in ("compiled", "python"):
        ch = partitioned_chain(27, P, seed=seed, backend=b)
        rec = stale_sweep(ch, part, th, tau, rounds, record=True, live=live, backend=b)
        res.append((rec, ch))
    (ra, ca), (rb, cb) = res
    assert np.array_equal(ra, rb)
    assert np.array_equal(ca.spins, cb.spins)
    assert np.array_equal(ca.shadow, cb.shadow)
    assert np.array_equal(ca.states, cb.states)


def test_pure_python_selected_by_environment():
    env = dict(os.environ, PBITNQS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from pbitnqs import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env["PBITNQS_PURE_PYTHON"] = "0"
    out = subprocess.run([sys.executable, "-c", "from pbitnqs import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "compiled"
