"""TFIM local energies and log-derivatives.

FRBM ratios are analytic. DBM ratios come from the dual-sampling estimator:
for a fixed visible configuration the auxiliary layers are sampled with the
visible layer clamped, and every single-flip probability ratio is the
clamped average of exp(-2 I_i v_i), reused across all sites i.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import os

import numpy as np

from . import kernels
from .model import DBM, FRBM, ArchitectureError, hidden_fields, log2cosh

# largest |exponent| passed to exp; flip exponents x are clipped to EXP_CLIP/2 so 2x fits too
EXP_CLIP = 500.0
DUAL_CHUNK = 64


class CollapsedEstimatorError(FloatingPointError):
    """A flip-probability estimate was not strictly positive."""


@dataclass
class LocalEnergyRecord:
    v: np.ndarray
    e_loc: float
    o_vector: np.ndarray


@dataclass
class DualSampleStats:
    p_flip: np.ndarray
    p_flip_sq: np.ndarray
    o_h: np.ndarray
    o_d: np.ndarray
    o_w: np.ndarray
    n_samples: int
    clipped: int = 0


def diagonal_energy(S, bonds, J=1.0):
    """-J sum over bonds of s_i s_j (batched over leading axes)."""
    S = np.asarray(S, np.float64)
    return -J * (S[..., bonds[:, 0]] * S[..., bonds[:, 1]]).sum(axis=-1)


def _require(theta, arch):
    if theta.arch != arch:
        raise ArchitectureError(f"expected a {arch.upper()}, got {theta.arch.upper()}")


def rbm_log_ratios(S, theta):
    """log Psi(S^(i)) - log Psi(S) for every row of S and every site i."""
    _require(theta, FRBM)
    t = theta.topology
    S = np.atleast_2d(np.asarray(S, np.float64))
    th = hidden_fields(S, theta)
    i, j = t.vh_pairs[:, 0], t.vh_pairs[:, 1]
    shifted = th[:, j] - 2.0 * theta.W_vh * S[:, i]
    per_edge = log2cosh(shifted) - log2cosh(th[:, j])
    return 0.5 * (-2.0 * theta.a * S + np.asarray(t.vh_incidence.T @ per_edge.T).T)


def rbm_ratio(S, i, theta):
    """Psi(S with site i flipped) / Psi(S)."""
    S = np.asarray(S, np.float64)
    return float(np.exp(rbm_log_ratios(S[None, :], theta)[0, i]))


def rbm_o_vectors(S, theta):
    """d log Psi / d theta for each row of S, in flat parameter order."""
    _require(theta, FRBM)
    t = theta.topology
    S = np.atleast_2d(np.asarray(S, np.float64))
    tanh_h = np.tanh(hidden_fields(S, theta))
    o_w = S[:, t.vh_pairs[:, 0]] * tanh_h[:, t.vh_pairs[:, 1]]
    return 0.5 * np.concatenate([S, tanh_h, o_w], axis=1)


def local_energies_rbm(S, theta, bonds, J, gamma):
    """Batched analytic local energies and O vectors for an FRBM."""
    S = np.atleast_2d(S)
    ratios = np.exp(rbm_log_ratios(S, theta))
    e = diagonal_energy(S, bonds, J) - gamma * ratios.sum(axis=1)
    return e, rbm_o_vectors(S, theta)


def local_energy_rbm(S, theta, bonds, J, gamma):
    e, o = local_energies_rbm(np.asarray(S)[None, :], theta, bonds, J, gamma)
    return LocalEnergyRecord(np.asarray(S).copy(), float(e[0]), o[0])


def taylor_corrected_amplitude(p, p_sq, n_c):
    """sqrt(p) plus the second-order correction Var_pop / (8 p^{3/2}), Var_pop = (p_sq - p^2)/N_c."""
    p = np.asarray(p, np.float64)
    if np.any(~(p > 0)):
        raise CollapsedEstimatorError("flip probability estimate <= 0 (clamped weights underflowed)")
    # same as var_pop / (8 p^1.5) but safe when p^1.5 underflows; p_sq/p^2 <= N_c
    rel = (np.asarray(p_sq, np.float64) / p) / p - 1.0
    out = np.sqrt(p) * (1.0 + rel / (8.0 * n_c))
    return float(out) if out.ndim == 0 else out


def _dual_kernel(theta_q, theta_f, configs, rng_state, n_c, beta, backend=None):
    t = theta_q.topology
    impl = kernels.impl if backend is None else kernels.load_backend(backend)
    ns = len(configs)
    p = np.empty((ns, t.n_visible))
    p2 = np.empty((ns, t.n_visible))
    oa = np.empty((ns, t.n_aux))
    oe = np.empty((ns, t.n_edges))
    g = t.graph
    clipped = impl.dual_stats(g.csr_indptr, g.csr_indices, g.csr_edge,
                              np.ascontiguousarray(theta_q.weights), np.ascontiguousarray(theta_q.bias),
                              np.ascontiguousarray(theta_f.weights), np.ascontiguousarray(theta_f.bias),
                              t.aux_order, t.n_visible, g.edge_list, configs, rng_state, beta, int(n_c),
                              p, p2, oa, oe, EXP_CLIP)
    return p, p2, oa, oe, clipped


def accumulate_dual_stats(v, chain, theta_q, n_c, theta_f=None, beta=1.0, backend=None):
    """Run ``n_c`` clamped sweeps from ``chain`` with visible spins fixed to ``v``.

    The chain's auxiliary spins are the warm start and are left at their final
    values; its random stream is advanced.
    """
    if n_c < 2:
        raise ValueError("N_c must be >= 2 for a population variance")
    theta_f = theta_q if theta_f is None else theta_f
    t = theta_q.topology
    chain.spins[:t.n_visible] = np.asarray(v, np.int8)
    configs = chain.spins[None, :].copy()
    p, p2, oa, oe, clipped = _dual_kernel(theta_q, theta_f, configs, chain.rng, n_c, beta, backend)
    chain.spins[:] = configs[0]
    chain.sweep_count += n_c
    return DualSampleStats(p[0], p2[0], oa[0, :t.n_hidden], oa[0, t.n_hidden:], oe[0], n_c, clipped)


def _thread_count():
    try:
        return max(1, int(os.environ.get("PBITNQS_THREADS", "1")))
    except ValueError:
        return 1


def dual_stats_batch(states, theta_q, theta_f, n_c, splitter, beta=1.0, threads=None, backend=None):
    """Dual-sampling accumulators for a batch of full network states.

    Rows are split into fixed chunks of ``DUAL_CHUNK``; chunk k draws from the
    k-th stream of ``splitter``, so results do not depend on the thread count.
    ``states`` is updated in place with the final auxiliary spins.
    """
    if n_c < 2:
        raise ValueError("N_c must be >= 2 for a population variance")
    ns = len(states)
    bounds = [(s, min(s + DUAL_CHUNK, ns)) for s in range(0, ns, DUAL_CHUNK)]
    streams = splitter.split(len(bounds))

    def run(k):
        lo, hi = bounds[k]
        block = np.ascontiguousarray(states[lo:hi])
        res = _dual_kernel(theta_q, theta_f, block, streams[k], n_c, beta, backend)
        states[lo:hi] = block
        return res

    threads = _thread_count() if threads is None else threads
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, range(len(bounds))))
    else:
        parts = [run(k) for k in range(len(bounds))]
    p, p2, oa, oe = (np.concatenate([r[i] for r in parts]) for i in range(4))
    return p, p2, oa, oe, sum(r[4] for r in parts)


def local_energies_dbm(states, theta, theta_q, bonds, J, gamma, n_c, splitter, beta=1.0,
                       threads=None, backend=None):
    """Batched dual-sampling local energies and O vectors.

    Returns ``(e_loc, O, clipped)``; ``states`` rows are full network states
    whose auxiliary block is the warm start.
    """
    _require(theta, DBM)
    nv = theta.topology.n_visible
    v = states[:, :nv].astype(np.float64)
    p, p2, oa, oe, clipped = dual_stats_batch(states, theta_q, theta, n_c, splitter, beta, threads, backend)
    amp = taylor_corrected_amplitude(p, p2, n_c)
    e = diagonal_energy(v, bonds, J) - gamma * amp.sum(axis=1)
    o = np.concatenate([0.5 * v, oa, oe], axis=1)
    return e, o, clipped


def local_energy_dbm(v, chain, theta, theta_q, bonds, J, gamma, n_c, beta=1.0, backend=None):
    _require(theta, DBM)
    st = accumulate_dual_stats(v, chain, theta_q, n_c, theta_f=theta, beta=beta, backend=backend)
    amp = taylor_corrected_amplitude(st.p_flip, st.p_flip_sq, n_c)
    vf = np.asarray(v, np.float64)
    e = float(diagonal_energy(vf, bonds, J) - gamma * amp.sum())
    o = np.concatenate([0.5 * vf, st.o_h, st.o_d, st.o_w])
    return LocalEnergyRecord(np.asarray(v).copy(), e, o)
