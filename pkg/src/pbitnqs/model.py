"""FRBM / DBM energies, parameters, analytic RBM amplitude, fixed-point quantization.

Network nodes are numbered visible, then hidden, then deep. The flat
parameter vector is ``[a, b, c, W_vh, W_hd]``: one bias per node followed by
one weight per edge, in the edge order of :attr:`Topology.graph`.
"""
from dataclasses import dataclass
from functools import cached_property
import json

import numpy as np
import scipy.sparse as sp

from .lattice import (DEEP, HIDDEN, VISIBLE, SparseGraph, greedy_color,
                      interlayer_pairs, mask_offsets, LatticeError)

FRBM, DBM = "frbm", "dbm"
CHECKPOINT_VERSION = 1


class ArchitectureError(ValueError):
    pass


class Topology:
    """Layer sizes and interlayer masks of an FRBM or DBM.

    ``vh_pairs`` and ``hd_pairs`` hold layer-local indices ``(i, j)``.
    """

    def __init__(self, arch, n_visible, n_hidden, n_deep, vh_pairs, hd_pairs=None,
                 L=None, k1=None, k2=None):
        if arch not in (FRBM, DBM):
            raise ArchitectureError(f"unknown architecture {arch!r}")
        hd_pairs = np.zeros((0, 2), np.int64) if hd_pairs is None else np.asarray(hd_pairs, np.int64).reshape(-1, 2)
        if arch == FRBM and (n_deep or len(hd_pairs)):
            raise ArchitectureError("an FRBM has no deep layer")
        self.arch = arch
        self.n_visible, self.n_hidden, self.n_deep = int(n_visible), int(n_hidden), int(n_deep)
        self.vh_pairs = np.asarray(vh_pairs, np.int64).reshape(-1, 2)
        self.hd_pairs = hd_pairs
        self.L, self.k1, self.k2 = L, k1, k2

    @cached_property
    def graph(self):
        nv, nh = self.n_visible, self.n_hidden
        e_vh = self.vh_pairs + np.array([0, nv])
        e_hd = self.hd_pairs + np.array([nv, nv + nh])
        layer = np.array([VISIBLE] * nv + [HIDDEN] * nh + [DEEP] * self.n_deep, np.int8)
        return SparseGraph(self.n_nodes, np.concatenate([e_vh, e_hd]), layer)

    @property
    def n_nodes(self):
        return self.n_visible + self.n_hidden + self.n_deep

    @property
    def n_aux(self):
        return self.n_hidden + self.n_deep

    @property
    def n_edges(self):
        return len(self.vh_pairs) + len(self.hd_pairs)

    @property
    def n_params(self):
        return self.n_nodes + self.n_edges

    @cached_property
    def coloring(self):
        return greedy_color(self.graph)

    @cached_property
    def sweep_order(self):
        """All nodes, color class by color class, ascending within a class."""
        return np.ascontiguousarray(np.concatenate(self.coloring.classes()), dtype=np.int64)

    @cached_property
    def aux_order(self):
        o = self.sweep_order
        return np.ascontiguousarray(o[o >= self.n_visible])

    @cached_property
    def vh_incidence(self):
        """(E_vh x n_visible) 0/1 matrix summing per-edge terms onto visible sites."""
        e = len(self.vh_pairs)
        return sp.csr_matrix((np.ones(e), (np.arange(e), self.vh_pairs[:, 0])),
                             shape=(e, self.n_visible))

    def slices(self):
        nv, nh = self.n_visible, self.n_hidden
        n, e1 = self.n_nodes, len(self.vh_pairs)
        return {
            "a": slice(0, nv), "b": slice(nv, nv + nh), "c": slice(nv + nh, n),
            "W_vh": slice(n, n + e1), "W_hd": slice(n + e1, self.n_params),
        }

    def describe(self):
        return {"arch": self.arch, "L": self.L, "k1": self.k1, "k2": self.k2,
                "n_visible": self.n_visible, "n_hidden": self.n_hidden, "n_deep": self.n_deep}

    def same_structure(self, other):
        return (self.arch == other.arch and self.n_visible == other.n_visible
                and self.n_hidden == other.n_hidden and self.n_deep == other.n_deep
                and np.array_equal(self.vh_pairs, other.vh_pairs)
                and np.array_equal(self.hd_pairs, other.hd_pairs))


def frbm_topology(L, k):
    N = L * L
    return Topology(FRBM, N, N, 0, interlayer_pairs(L, k), L=L, k1=k)


def dbm_topology(L, k1, k2):
    N = L * L
    return Topology(DBM, N, N, N, interlayer_pairs(L, k1), interlayer_pairs(L, k2), L=L, k1=k1, k2=k2)


def dense_topology(arch, n_visible, n_hidden, n_deep=0):
    """Fully connected interlayer masks (used for small test machines)."""
    vh = [(i, j) for i in range(n_visible) for j in range(n_hidden)]
    hd = [(j, l) for j in range(n_hidden) for l in range(n_deep)]
    return Topology(arch, n_visible, n_hidden, n_deep, vh, hd or None)


@dataclass(frozen=True)
class ModelParameters:
    topology: Topology
    theta: np.ndarray

    def __post_init__(self):
        th = np.ascontiguousarray(self.theta, dtype=np.float64)
        if th.shape != (self.topology.n_params,):
            raise ValueError(f"expected {self.topology.n_params} parameters, got {th.shape}")
        if not np.all(np.isfinite(th)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "theta", th)

    arch = property(lambda self: self.topology.arch)
    k1 = property(lambda self: self.topology.k1)
    k2 = property(lambda self: self.topology.k2)

    def _part(self, name):
        return self.theta[self.topology.slices()[name]]

    a = property(lambda self: self._part("a"))
    b = property(lambda self: self._part("b"))
    c = property(lambda self: self._part("c"))
    W_vh = property(lambda self: self._part("W_vh"))
    W_hd = property(lambda self: self._part("W_hd"))

    @property
    def bias(self):
        return self.theta[:self.topology.n_nodes]

    @property
    def weights(self):
        return self.theta[self.topology.n_nodes:]

    def with_theta(self, theta):
        return ModelParameters(self.topology, theta)

    @classmethod
    def from_parts(cls, topology, a, b, W_vh, c=None, W_hd=None):
        c = np.zeros(topology.n_deep) if c is None else c
        W_hd = np.zeros(len(topology.hd_pairs)) if W_hd is None else W_hd
        return cls(topology, np.concatenate([a, b, c, W_vh, W_hd]).astype(np.float64))

    def kernel_arrays(self):
        g = self.topology.graph
        return g.csr_indptr, g.csr_indices, g.csr_edge, np.ascontiguousarray(self.weights), np.ascontiguousarray(self.bias)


def zero_params(topology):
    return ModelParameters(topology, np.zeros(topology.n_params))


def init_params(topology, seed, scale=0.01):
    """Every bias and weight drawn i.i.d. from N(0, scale^2)."""
    rng = np.random.default_rng(seed)
    return ModelParameters(topology, scale * rng.standard_normal(topology.n_params))


def network_energy(state, theta):
    """Energy -sum bias*sigma - sum_edges W sigma_u sigma_v of full states (batched on axis 0)."""
    s = np.asarray(state, dtype=np.float64)
    e = theta.topology.graph.edge_list
    return -(s @ theta.bias) - (s[..., e[:, 0]] * s[..., e[:, 1]]) @ theta.weights


def _check_sizes(theta, **layers):
    t = theta.topology
    want = {"S": t.n_visible, "h": t.n_hidden, "d": t.n_deep}
    for name, arr in layers.items():
        if np.shape(arr)[-1] != want[name]:
            raise ValueError(f"{name} has {np.shape(arr)[-1]} spins, expected {want[name]}")


def frbm_energy(S, h, theta):
    if theta.arch != FRBM:
        raise ArchitectureError("frbm_energy needs an FRBM")
    _check_sizes(theta, S=S, h=h)
    return network_energy(np.concatenate([S, h], axis=-1), theta)


def dbm_energy(S, h, d, theta):
    if theta.arch != DBM:
        raise ArchitectureError("dbm_energy needs a DBM")
    _check_sizes(theta, S=S, h=h, d=d)
    return network_energy(np.concatenate([S, h, d], axis=-1), theta)


def local_field(i, state, theta):
    """I_i = bias_i + sum_j W_ij sigma_j; flipping i changes the energy by 2 I_i sigma_i."""
    g = theta.topology.graph
    lo, hi = g.csr_indptr[i], g.csr_indptr[i + 1]
    nb, eid = g.csr_indices[lo:hi], g.csr_edge[lo:hi]
    return float(theta.bias[i] + np.dot(theta.weights[eid], np.asarray(state, np.float64)[nb]))


def log2cosh(x):
    return np.logaddexp(x, -x)


def vh_matrix(theta):
    """W_vh as a sparse (n_visible x n_hidden) matrix."""
    t = theta.topology
    return sp.csr_matrix((theta.W_vh, (t.vh_pairs[:, 0], t.vh_pairs[:, 1])),
                         shape=(t.n_visible, t.n_hidden))


def hidden_fields(S, theta):
    """b_j + sum_i W_ij s_i for each row of S."""
    S = np.asarray(S, np.float64)
    return np.asarray(vh_matrix(theta).T @ S.T).T + theta.b


def log_psi_rbm(S, theta):
    """log Psi(S) = (1/2)[a.S + sum_j log 2cosh(b_j + sum_i W_ij s_i)], constant dropped."""
    if theta.arch != FRBM:
        raise ArchitectureError("log_psi_rbm needs an FRBM")
    S = np.asarray(S, np.float64)
    return 0.5 * (S @ theta.a + log2cosh(hidden_fields(S, theta)).sum(axis=-1))


def adjacent_degrees(L, k):
    if 2 * k >= L:
        raise LatticeError(f"radius k={k} must be < L/2")
    if k < 0:
        raise LatticeError("radius must be non-negative")
    return len(mask_offsets(k))


def param_count(arch, L, k1, k2=None):
    """Biases of every layer plus one weight per masked interlayer connection."""
    N = L * L
    if arch == FRBM:
        return 2 * N + N * adjacent_degrees(L, k1)
    if arch == DBM:
        if k2 is None:
            raise ArchitectureError("a DBM needs k2")
        return 3 * N + N * adjacent_degrees(L, k1) + N * adjacent_degrees(L, k2)
    raise ArchitectureError(f"unknown architecture {arch!r}")


@dataclass(frozen=True)
class FixedPointFormat:
    sign_bits: int = 1
    integer_bits: int = 6
    fraction_bits: int = 3

    @property
    def step(self):
        return 2.0 ** -self.fraction_bits

    @property
    def max_value(self):
        return 2.0 ** self.integer_bits - self.step

    @property
    def min_value(self):
        return -(2.0 ** self.integer_bits)

    @property
    def total_bits(self):
        return self.sign_bits + self.integer_bits + self.fraction_bits


S6_3 = FixedPointFormat()


def quantize_array(x, fmt=S6_3):
    """Round to the nearest step (ties away from zero), then saturate."""
    x = np.asarray(x, np.float64)
    q = np.sign(x) * np.floor(np.abs(x) / fmt.step + 0.5) * fmt.step
    return np.clip(q, fmt.min_value, fmt.max_value)


def quantize(theta, fmt=S6_3):
    return theta.with_theta(quantize_array(theta.theta, fmt))


def save_checkpoint(path, theta, seed=None, extra=None):
    t = theta.topology
    rec = {
        "format": "pbitnqs-checkpoint",
        "version": CHECKPOINT_VERSION,
        **t.describe(),
        "seed": seed,
        "vh_pairs": t.vh_pairs.tolist(),
        "hd_pairs": t.hd_pairs.tolist(),
        "theta": [float(x).hex() for x in theta.theta],
    }
    if extra:
        rec["extra"] = extra
    with open(path, "w") as fh:
        json.dump(rec, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Returns ``(ModelParameters, record)``."""
    with open(path) as fh:
        rec = json.load(fh)
    if rec.get("format") != "pbitnqs-checkpoint" or rec.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    topo = Topology(rec["arch"], rec["n_visible"], rec["n_hidden"], rec["n_deep"],
                    rec["vh_pairs"], rec["hd_pairs"] or None, L=rec["L"], k1=rec["k1"], k2=rec["k2"])
    theta = np.array([float.fromhex(x) for x in rec["theta"]])
    return ModelParameters(topo, theta), rec
