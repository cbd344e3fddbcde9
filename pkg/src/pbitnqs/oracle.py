"""Exact reference values for small systems.

* ground-state energies of the TFIM by Lanczos on a matrix-free operator;
* Boltzmann-machine marginals and flip ratios by exhaustive summation.

Nothing here calls the model's amplitude code: energies are summed directly
from the edge lists so cross-checks against the estimators are genuine.
Basis states use little-endian bit order, bit k set meaning spin k = -1.
"""
import csv
import io

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from .lattice import build_tfim_bonds

ED_MAX_SITES = 20
AUX_MAX_NODES = 20
ENUM_BUDGET = 1 << 24


class OracleSizeError(ValueError):
    pass


def basis_spins(n):
    idx = np.arange(1 << n, dtype=np.int64)
    return (1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)).astype(np.float64)


def tfim_diagonal(n, bonds, J):
    bonds = np.asarray(bonds, np.int64).reshape(-1, 2)
    s = basis_spins(n)
    return -J * (s[:, bonds[:, 0]] * s[:, bonds[:, 1]]).sum(axis=1)


def tfim_operator(n, bonds, J, gamma):
    """Matrix-free H = -J sum s^z s^z - gamma sum s^x on 2^n states."""
    if n > ED_MAX_SITES:
        raise OracleSizeError(f"N={n} exceeds the exact-diagonalization budget of {ED_MAX_SITES} sites")
    diag = tfim_diagonal(n, bonds, J)
    idx = np.arange(1 << n, dtype=np.int64)
    flips = [idx ^ (1 << k) for k in range(n)]

    def matvec(x):
        x = np.ravel(x)
        y = diag * x
        for f in flips:
            y -= gamma * x[f]
        return y

    dim = 1 << n
    return spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.float64)


def ed_ground_state(n, bonds, J, gamma):
    """Ground energy and normalized ground vector, sign fixed so its sum is positive."""
    op = tfim_operator(n, bonds, J, gamma)
    dim = 1 << n
    if dim <= 256:
        H = op.matmat(np.eye(dim))
        w, V = scipy.linalg.eigh(H)
        e0, psi = w[0], V[:, 0]
    else:
        w, V = spla.eigsh(op, k=1, which="SA", tol=1e-13, v0=np.ones(dim), maxiter=100000)
        e0, psi = w[0], V[:, 0]
        # one Rayleigh-quotient refinement pass
        e0 = float(psi @ op.matvec(psi) / (psi @ psi))
    psi = psi / np.linalg.norm(psi)
    if psi.sum() < 0:
        psi = -psi
    return float(e0), psi


def ed_ground_energy(n, bonds, J, gamma):
    return ed_ground_state(n, bonds, J, gamma)[0]


def tfim_ground_energy(L, J, gamma):
    return ed_ground_energy(L * L, build_tfim_bonds(L), J, gamma)


def perron_frobenius_ok(psi, tol=1e-12):
    """True when every amplitude has the sign of the vector sum (up to ``tol``)."""
    return bool(np.all(psi >= -tol)) or bool(np.all(psi <= tol))


# ----- Boltzmann machine marginals ------------------------------------------

def _dense_weights(theta):
    t = theta.topology
    wvh = np.zeros((t.n_visible, t.n_hidden))
    wvh[t.vh_pairs[:, 0], t.vh_pairs[:, 1]] = theta.W_vh
    whd = np.zeros((t.n_hidden, t.n_deep))
    if t.n_deep:
        whd[t.hd_pairs[:, 0], t.hd_pairs[:, 1]] = theta.W_hd
    return wvh, whd


def _joint_neg_energy(v, h, d, theta):
    # -E(v, h, d) for one v and stacked (h, d) rows, term by term
    wvh, whd = _dense_weights(theta)
    out = v @ theta.a + h @ theta.b + (v @ wvh) @ h.T
    if d is not None and theta.topology.n_deep:
        out = out + d @ theta.c + np.einsum("kj,jl,kl->k", h, whd, d)
    return out


def log_brute_marginal(theta, v):
    """log sum_{h,d} exp(-E(v,h,d)) by full enumeration of the auxiliary layers."""
    t = theta.topology
    if t.n_aux > AUX_MAX_NODES:
        raise OracleSizeError(f"{t.n_aux} auxiliary nodes exceed the enumeration budget of {AUX_MAX_NODES}")
    v = np.asarray(v, np.float64)
    aux = basis_spins(t.n_aux)
    h, d = aux[:, :t.n_hidden], aux[:, t.n_hidden:]
    return float(logsumexp(_joint_neg_energy(v, h, d if t.n_deep else None, theta)))


def conditional_aux_table(theta, v):
    """(aux states, p(h, d | v)) for every auxiliary configuration, basis order."""
    t = theta.topology
    if t.n_aux > AUX_MAX_NODES:
        raise OracleSizeError(f"{t.n_aux} auxiliary nodes exceed the enumeration budget of {AUX_MAX_NODES}")
    aux = basis_spins(t.n_aux)
    ne = _joint_neg_energy(np.asarray(v, np.float64), aux[:, :t.n_hidden],
                           aux[:, t.n_hidden:] if t.n_deep else None, theta)
    return aux, np.exp(ne - logsumexp(ne))


def exact_aux_draws(theta, v, n, rng):
    """``n`` exact draws of the auxiliary layers given ``v`` (int8 rows)."""
    aux, p = conditional_aux_table(theta, v)
    return aux[rng.choice(len(aux), size=n, p=p)].astype(np.int8)


def brute_marginal(theta, v):
    """Unnormalized p(v) = sum_{h,d} exp(-E(v,h,d))."""
    return float(np.exp(log_brute_marginal(theta, v)))


def exact_ratio(theta, v, i):
    """sqrt(p(v^(i)) / p(v)) from two exhaustive sums."""
    v = np.asarray(v, np.float64)
    vf = v.copy()
    vf[i] = -vf[i]
    return float(np.exp(0.5 * (log_brute_marginal(theta, vf) - log_brute_marginal(theta, v))))


def log_marginals(theta):
    """log p(v) (unnormalized) for all 2^N_v visible states, in basis order.

    FRBM: hidden layer enumerated. DBM: hidden layer enumerated, the deep layer
    summed in closed form (deep units are independent given h).
    """
    t = theta.topology
    if t.n_visible > ED_MAX_SITES:
        raise OracleSizeError("too many visible spins for exhaustive marginals")
    if (1 << (t.n_visible + t.n_hidden)) > ENUM_BUDGET or t.n_aux > 2 * AUX_MAX_NODES:
        raise OracleSizeError("visible x hidden enumeration exceeds the budget")
    wvh, whd = _dense_weights(theta)
    V = basis_spins(t.n_visible)
    H = basis_spins(t.n_hidden)
    h_term = H @ theta.b
    if t.n_deep:
        h_term = h_term + np.logaddexp(H @ whd + theta.c, -(H @ whd + theta.c)).sum(axis=1)
    out = np.empty(len(V))
    chunk = max(1, ENUM_BUDGET // max(1, len(H)) // 4)
    for lo in range(0, len(V), chunk):
        vb = V[lo:lo + chunk]
        out[lo:lo + chunk] = vb @ theta.a + logsumexp((vb @ wvh) @ H.T + h_term, axis=1)
    return out


def exact_distribution(theta):
    """(visible states, normalized P(v), unnormalized log p(v))."""
    lm = log_marginals(theta)
    P = np.exp(lm - logsumexp(lm))
    return basis_spins(theta.topology.n_visible), P, lm


def exact_local_energies(theta, bonds, J, gamma, logm=None):
    """E_loc(v) for every basis state with exact amplitude ratios."""
    n = theta.topology.n_visible
    lm = log_marginals(theta) if logm is None else logm
    idx = np.arange(1 << n, dtype=np.int64)
    off = np.zeros(1 << n)
    for k in range(n):
        off += np.exp(0.5 * (lm[idx ^ (1 << k)] - lm))
    return tfim_diagonal(n, bonds, J) - gamma * off


def exact_variational_energy(theta, bonds, J, gamma):
    """sum_v P(v) E_loc(v) with P and ratios from exhaustive marginals."""
    _, P, lm = exact_distribution(theta)
    return float(P @ exact_local_energies(theta, bonds, J, gamma, lm))


def boltzmann_table(net):
    """Exact Boltzmann probabilities of a small generic network, basis order."""
    n = net.graph.node_count
    if n > 24:
        raise OracleSizeError("network too large to enumerate")
    S = basis_spins(n)
    e = net.graph.edge_list
    neg_e = net.beta * (S @ net.bias + (S[:, e[:, 0]] * S[:, e[:, 1]]) @ net.weights)
    return np.exp(neg_e - logsumexp(neg_e))


# ----- golden file -----------------------------------------------------------

GOLDEN_HEADER = ["case_id", "N", "J", "gamma", "E0"]


def golden_cases():
    """(case_id, N, bonds, J, gamma) rows of the committed ED table."""
    cases = [
        ("single_spin", 1, np.zeros((0, 2), np.int64), 1.0, 3.044),
        ("open_pair", 2, np.array([[0, 1]]), 1.0, 1.0),
    ]
    for g in (0.0, 1.0, 3.044, 20.0):
        cases.append((f"torus_L3_g{g:g}", 9, build_tfim_bonds(3), 1.0, g))
    cases.append(("torus_L4_g3.044", 16, build_tfim_bonds(4), 1.0, 3.044))
    return cases


def golden_csv(cases=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GOLDEN_HEADER)
    for cid, n, bonds, J, g in (golden_cases() if cases is None else cases):
        w.writerow([cid, n, f"{J:g}", f"{g:g}", f"{ed_ground_energy(n, bonds, J, g):.10f}"])
    return buf.getvalue()


def read_golden(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def open_chain_bonds(n):
    return np.array([(i, i + 1) for i in range(n - 1)], np.int64).reshape(-1, 2)


def check_ed_size(n):
    if n < 1 or n > ED_MAX_SITES:
        raise OracleSizeError(f"N={n} outside the exact-diagonalization range 1..{ED_MAX_SITES}")


# ----- brute-marginal fixtures -------------------------------------------------

MARGINAL_HEADER = ["case_id", "v_index", "log_marginal"]


def marginal_fixture_models():
    """Seeded small machines whose exhaustive marginals are committed as fixtures."""
    from .model import DBM, FRBM, ModelParameters, dense_topology
    out = []
    for cid, topo, seed in (("frbm_4_4", dense_topology(FRBM, 4, 4), 11),
                            ("dbm_4_4_4", dense_topology(DBM, 4, 4, 4), 12)):
        rng = np.random.default_rng(seed)
        out.append((cid, ModelParameters(topo, rng.uniform(-1.0, 1.0, topo.n_params))))
    return out


def marginal_fixture_csv():
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MARGINAL_HEADER)
    for cid, theta in marginal_fixture_models():
        V = basis_spins(theta.topology.n_visible)
        for k, v in enumerate(V):
            w.writerow([cid, k, f"{log_brute_marginal(theta, v):.10f}"])
    return buf.getvalue()
