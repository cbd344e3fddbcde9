import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from pbitnqs.model import (DBM, FRBM, S6_3, ArchitectureError, ModelParameters, dbm_topology,
                           dense_topology, frbm_energy, dbm_energy, frbm_topology, init_params,
                           load_checkpoint, local_field, log_psi_rbm, network_energy, param_count,
                           quantize, quantize_array, save_checkpoint, zero_params)
from pbitnqs.oracle import basis_spins

from conftest import random_params


def spins(rng, n):
    return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)


def loop_energy(theta, S, h, d=None):
    # independent term-by-term sum over the masks
    t = theta.topology
    e = -sum(theta.a[i] * S[i] for i in range(t.n_visible))
    e -= sum(theta.b[j] * h[j] for j in range(t.n_hidden))
    for (i, j), w in zip(t.vh_pairs, theta.W_vh):
        e -= w * S[i] * h[j]
    if d is not None:
        e -= sum(theta.c[l] * d[l] for l in range(t.n_deep))
        for (j, l), w in zip(t.hd_pairs, theta.W_hd):
            e -= w * h[j] * d[l]
    return e


def test_zero_parameters_zero_energy():
    rng = np.random.default_rng(0)
    th = zero_params(frbm_topology(3, 1))
    assert frbm_energy(spins(rng, 9), spins(rng, 9), th) == 0.0
    thd = zero_params(dbm_topology(3, 1, 1))
    assert dbm_energy(spins(rng, 9), spins(rng, 9), spins(rng, 9), thd) == 0.0


def test_single_edge_energy():
    t = dense_topology(FRBM, 1, 1)
    th = ModelParameters.from_parts(t, [0.0], [0.0], [0.7])
    assert frbm_energy(np.array([1]), np.array([1]), th) == pytest.approx(-0.7)


@pytest.mark.parametrize("seed", range(5))
def test_energy_matches_term_by_term(seed):
    rng = np.random.default_rng(seed)
    th = random_params(frbm_topology(3, 1), rng, 2.0)
    S, h = spins(rng, 9), spins(rng, 9)
    assert frbm_energy(S, h, th) == pytest.approx(loop_energy(th, S, h), abs=1e-12)
    thd = random_params(dbm_topology(3, 1, 1), rng, 2.0)
    d = spins(rng, 9)
    assert dbm_energy(S, h, d, thd) == pytest.approx(loop_energy(thd, S, h, d), abs=1e-12)


def test_dbm_reduces_to_frbm():
    rng = np.random.default_rng(1)
    tf, td = frbm_topology(3, 1), dbm_topology(3, 1, 1)
    a, b, w = rng.normal(size=9), rng.normal(size=9), rng.normal(size=len(tf.vh_pairs))
    thf = ModelParameters.from_parts(tf, a, b, w)
    thd = ModelParameters.from_parts(td, a, b, w)
    S, h, d = spins(rng, 9), spins(rng, 9), spins(rng, 9)
    assert dbm_energy(S, h, d, thd) == pytest.approx(frbm_energy(S, h, thf), abs=1e-12)


def test_energy_size_and_arch_checks():
    th = zero_params(frbm_topology(3, 1))
    with pytest.raises(ValueError):
        frbm_energy(np.ones(8), np.ones(9), th)
    with pytest.raises(ArchitectureError):
        dbm_energy(np.ones(9), np.ones(9), np.ones(9), th)


@given(st.integers(0, 2**32), st.floats(-3, 3))
def test_energy_linear_in_parameters(seed, alpha):
    rng = np.random.default_rng(seed)
    th = random_params(dbm_topology(3, 1, 1), rng, 2.0)
    state = spins(rng, 27)
    scaled = th.with_theta(alpha * th.theta)
    assert network_energy(state, scaled) == pytest.approx(alpha * network_energy(state, th), abs=1e-10)


@given(st.integers(0, 2**32), st.sampled_from(["frbm", "dbm"]))
def test_flip_energy_change_is_twice_field(seed, arch):
    rng = np.random.default_rng(seed)
    topo = frbm_topology(4, 1) if arch == FRBM else dbm_topology(4, 1, 1)
    th = random_params(topo, rng, 2.0)
    state = spins(rng, topo.n_nodes)
    e0 = network_energy(state, th)
    for i in range(topo.n_nodes):
        f = state.copy()
        f[i] = -f[i]
        dE = network_energy(f, th) - e0
        assert dE == pytest.approx(2 * local_field(i, state, th) * state[i], abs=1e-12)


def test_local_field_examples():
    t = dense_topology(FRBM, 2, 1)
    th = ModelParameters.from_parts(t, [0.7, 0.0], [0.0], [0.0, 0.0])
    assert local_field(0, np.ones(3), th) == pytest.approx(0.7)
    assert local_field(1, np.ones(3), th) == 0.0


def brute_log_marginal(theta, S):
    H = basis_spins(theta.topology.n_hidden)
    return np.log(sum(np.exp(-loop_energy(theta, S, h)) for h in H))


@pytest.mark.parametrize("seed", range(4))
def test_log_psi_rbm_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    th = random_params(dense_topology(FRBM, 4, 4), rng)
    V = basis_spins(4)
    lp = log_psi_rbm(V, th)
    bm = np.array([brute_log_marginal(th, v) for v in V])
    ratio = np.exp(2 * (lp[:, None] - lp[None, :]))
    ref = np.exp(bm[:, None] - bm[None, :])
    assert np.max(np.abs(ratio / ref - 1)) <= 1e-12


def test_log_psi_rbm_special_cases():
    t = frbm_topology(3, 1)
    V = basis_spins(9)[:50]
    assert np.ptp(log_psi_rbm(V, zero_params(t))) == 0.0
    a = np.linspace(-1, 1, 9)
    th = ModelParameters.from_parts(t, a, np.zeros(9), np.zeros(len(t.vh_pairs)))
    S = V[7]
    for i in range(9):
        f = S.copy()
        f[i] = -f[i]
        assert log_psi_rbm(S, th) - log_psi_rbm(f, th) == pytest.approx(a[i] * S[i])
    with pytest.raises(ArchitectureError):
        log_psi_rbm(V, zero_params(dbm_topology(3, 1, 1)))


def test_init_params():
    t = frbm_topology(10, 2)
    a, b = init_params(t, 5), init_params(t, 5)
    assert np.array_equal(a.theta, b.theta)
    assert not np.array_equal(a.theta, init_params(t, 6).theta)
    big = init_params(dbm_topology(20, 2, 2), 0)
    assert big.theta.size >= 10_000
    assert 0.009 <= big.theta.std() <= 0.011


PARAM_TABLE = [
    (FRBM, 10, 1, None, 700), (FRBM, 10, 2, None, 1500), (FRBM, 10, 3, None, 3100),
    (DBM, 10, 1, 1, 1300), (DBM, 10, 2, 1, 2100), (DBM, 10, 2, 2, 2900),
    (DBM, 35, 2, 2, 35525),
]


@pytest.mark.parametrize("arch,L,k1,k2,n", PARAM_TABLE)
def test_param_count_tables(arch, L, k1, k2, n):
    assert param_count(arch, L, k1, k2) == n
    topo = frbm_topology(L, k1) if arch == FRBM else dbm_topology(L, k1, k2)
    assert topo.n_params == n


def test_param_count_errors():
    with pytest.raises(ArchitectureError):
        param_count(DBM, 10, 1)
    with pytest.raises(ValueError):
        param_count(FRBM, 4, 2)


def test_quantize_examples():
    assert quantize_array(0.125) == 0.125
    assert quantize_array(100.0) == 63.875
    assert quantize_array(-100.0) == -64.0
    assert quantize_array(0.19) == 0.25
    assert quantize_array(0.0625) == 0.125       # tie away from zero
    assert quantize_array(-0.0625) == -0.125
    assert S6_3.total_bits == 10 and S6_3.step == 0.125


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-200, 200)))
def test_quantize_properties(x):
    q = quantize_array(x)
    assert np.array_equal(quantize_array(q), q)
    assert np.all(q >= -64.0) and np.all(q <= 63.875)
    assert np.all(np.round(q * 8) == q * 8)
    inside = (x >= -64.0) & (x <= 63.875)
    assert np.all(np.abs(q - x)[inside] <= 0.0625)


def test_quantize_params():
    th = init_params(frbm_topology(3, 1), 0, scale=1.0)
    q = quantize(th)
    assert q.topology is th.topology
    assert np.array_equal(quantize(q).theta, q.theta)


def test_parameter_validation():
    t = frbm_topology(3, 1)
    with pytest.raises(ValueError):
        ModelParameters(t, np.zeros(3))
    with pytest.raises(ValueError):
        ModelParameters(t, np.full(t.n_params, np.nan))


def test_flat_layout():
    t = dbm_topology(3, 1, 1)
    th = ModelParameters(t, np.arange(t.n_params, dtype=float))
    assert th.a[0] == 0 and th.b[0] == 9 and th.c[0] == 18 and th.W_vh[0] == 27
    assert th.W_hd[-1] == t.n_params - 1
    assert np.array_equal(np.concatenate([th.bias, th.weights]), th.theta)


@pytest.mark.parametrize("topo", [frbm_topology(3, 1), dbm_topology(4, 1, 1), dense_topology(DBM, 2, 3, 2)])
def test_checkpoint_round_trip(tmp_path, topo):
    rng = np.random.default_rng(0)
    th = ModelParameters(topo, rng.normal(size=topo.n_params) * np.pi)
    path = tmp_path / "ck.json"
    save_checkpoint(path, th, seed=9, extra={"note": 1})
    back, rec = load_checkpoint(path)
    assert np.array_equal(back.theta, th.theta)
    assert back.topology.same_structure(topo)
    assert rec["seed"] == 9 and rec["arch"] == topo.arch


def test_checkpoint_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_checkpoint(p)


def test_topology_masks_match_lattice_distance():
    t = dbm_topology(5, 1, 2)
    assert len(t.vh_pairs) == 25 * 5 and len(t.hd_pairs) == 25 * 13
    nodes = t.graph.node_layer
    assert list(np.bincount(nodes)) == [25, 25, 25]
    for (u, v) in itertools.islice(t.graph.edge_list, 0, None, 37):
        assert abs(int(nodes[u]) - int(nodes[v])) == 1
