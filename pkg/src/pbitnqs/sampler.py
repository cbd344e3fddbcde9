"""Software p-bit sampler: single-spin p-bit rule and chromatic Gibbs sweeps.

A sweep visits the color classes of a proper coloring in order; nodes of
one class share no edges, so updating them one after another is the same as
updating them in parallel. Each node update consumes exactly one uniform
draw from the chain's xoshiro256++ stream, in sweep order.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .lattice import greedy_color
from .rng import seed_state, substreams


class ColoringError(ValueError):
    pass


def _impl(backend):
    return kernels.impl if backend is None else kernels.load_backend(backend)


class BoltzmannNetwork:
    """Ising network E = -sum b_i s_i - sum_edges W_e s_u s_v with a sweep order."""

    def __init__(self, graph, bias, weights, coloring=None, beta=1.0):
        self.graph = graph
        self.bias = np.ascontiguousarray(bias, np.float64)
        self.weights = np.ascontiguousarray(weights, np.float64)
        if self.bias.shape != (graph.node_count,) or self.weights.shape != (graph.edge_count,):
            raise ValueError("bias/weight sizes do not match the graph")
        self.coloring = greedy_color(graph) if coloring is None else coloring
        if not self.coloring.is_proper(graph):
            raise ColoringError("coloring is not proper for this graph")
        self.order = np.ascontiguousarray(np.concatenate(self.coloring.classes()) if graph.node_count else
                                          np.zeros(0), dtype=np.int64)
        self.beta = float(beta)

    @classmethod
    def from_params(cls, theta, beta=1.0):
        t = theta.topology
        net = cls.__new__(cls)
        net.graph, net.coloring = t.graph, t.coloring
        net.bias = np.ascontiguousarray(theta.bias)
        net.weights = np.ascontiguousarray(theta.weights)
        net.order = t.sweep_order
        net.beta = float(beta)
        return net

    def kernel_args(self):
        g = self.graph
        return g.csr_indptr, g.csr_indices, g.csr_edge, self.weights, self.bias

    def energy(self, states):
        s = np.asarray(states, np.float64)
        e = self.graph.edge_list
        return -(s @ self.bias) - (s[..., e[:, 0]] * s[..., e[:, 1]]) @ self.weights


def as_network(model, beta=1.0):
    if isinstance(model, BoltzmannNetwork):
        return model
    return BoltzmannNetwork.from_params(model, beta)


@dataclass
class ChainState:
    spins: np.ndarray
    rng: np.ndarray
    sweep_count: int = 0

    def copy(self):
        return ChainState(self.spins.copy(), self.rng.copy(), self.sweep_count)


def new_chain(n_nodes, seed=None, state=None, backend=None):
    """Chain with uniformly random initial spins drawn from its own stream."""
    rng = seed_state(seed) if state is None else np.array(state, dtype=np.uint64)
    u = np.empty(n_nodes)
    _impl(backend).uniforms(rng, u)
    spins = np.where(u < 0.5, 1, -1).astype(np.int8)
    return ChainState(spins, rng)


def independent_chains(n_nodes, seed, count, backend=None):
    """``count`` chains on non-overlapping jumped substreams of one seed."""
    return [new_chain(n_nodes, state=st, backend=backend) for st in substreams(seed, count)]


def pbit_update(field, beta, rng):
    """sgn(tanh(beta*I) - r), r uniform on [-1, 1): +1 with probability (1 + tanh(beta*I))/2."""
    r = 2.0 * rng.uniform() - 1.0
    return 1 if math.tanh(beta * field) > r else -1


def chromatic_sweep(chain, model, n_sweeps=1, beta=None, backend=None):
    net = as_network(model)
    b = net.beta if beta is None else beta
    _impl(backend).sweeps(*net.kernel_args(), net.order, chain.spins, chain.rng, b, int(n_sweeps))
    chain.sweep_count += int(n_sweeps)
    return chain


def clamped_sweep(chain, v_fixed, theta, n_sweeps=1, beta=1.0, backend=None):
    """Sweeps over hidden/deep nodes only, with the visible layer pinned to ``v_fixed``."""
    t = theta.topology
    chain.spins[:t.n_visible] = np.asarray(v_fixed, np.int8)
    net = BoltzmannNetwork.from_params(theta, beta)
    _impl(backend).sweeps(*net.kernel_args(), t.aux_order, chain.spins, chain.rng, beta, int(n_sweeps))
    chain.sweep_count += int(n_sweeps)
    return chain


@dataclass
class SampleBatch:
    visible: np.ndarray
    aux: np.ndarray
    states: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.visible)


def sample_states(chain, model, n_samples, burn_in=0, sweeps_per_sample=1, beta=None, backend=None):
    """Full-network states recorded every ``sweeps_per_sample`` sweeps after ``burn_in``."""
    net = as_network(model)
    b = net.beta if beta is None else beta
    if n_samples < 1:
        raise ValueError("need at least one sample")
    out = np.empty((n_samples, net.graph.node_count), np.int8)
    _impl(backend).sample_chain(*net.kernel_args(), net.order, chain.spins, chain.rng, b,
                                int(burn_in), int(sweeps_per_sample), out)
    chain.sweep_count += int(burn_in) + n_samples * int(sweeps_per_sample)
    return out


def sample_visible(theta_q, n_samples, burn_in, sweeps_per_sample=1, seed=None, chain=None,
                   beta=1.0, backend=None):
    """Visible configurations from a free-running chain over all layers.

    Pass ``chain`` to continue a persistent chain; otherwise one is seeded.
    The auxiliary spins at each sampling instant are kept for warm starts.
    """
    t = theta_q.topology
    if chain is None:
        chain = new_chain(t.n_nodes, seed=seed, backend=backend)
    states = sample_states(chain, BoltzmannNetwork.from_params(theta_q, beta), n_samples,
                           burn_in, sweeps_per_sample, backend=backend)
    return SampleBatch(states[:, :t.n_visible], states[:, t.n_visible:], states)


def state_index(states):
    """Little-endian bit index with bit k set when spin k is -1."""
    s = np.asarray(states)
    bits = (s < 0).astype(np.int64)
    return bits @ (1 << np.arange(s.shape[-1], dtype=np.int64))


def index_states(n):
    """All 2^n spin configurations in little-endian index order."""
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def empirical_distribution(states):
    n = np.shape(states)[-1]
    return np.bincount(state_index(states), minlength=1 << n) / len(states)
