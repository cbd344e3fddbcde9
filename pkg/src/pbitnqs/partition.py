"""Multi-device simulation: graph partitioning and stale boundary exchange.

Partitions are grown greedily from spread-out seeds and then refined with
boundary moves and Kernighan-Lin pair swaps. Sampling runs in synchronous
rounds: every partition does ``tau`` local sweeps reading cross-partition
neighbours from a shadow copy, then all shadows are refreshed at once.
"""
from dataclasses import dataclass, field
from collections import deque
import csv
import heapq
import io
import math

import numpy as np
import scipy.sparse as sp

from . import kernels
from .rng import long_jumped, seed_state
from .sampler import as_network, new_chain
from .stats import blocking_se


class PartitionError(ValueError):
    pass


@dataclass
class Partition:
    part_of: np.ndarray
    n_parts: int
    cut_edges: np.ndarray            # indices into graph.edge_list
    boundary_nodes: list = field(repr=False)
    edge_count: int = 0

    @classmethod
    def from_assignment(cls, g, part_of, n_parts):
        part_of = np.ascontiguousarray(part_of, dtype=np.int64)
        if part_of.shape != (g.node_count,):
            raise PartitionError("assignment length does not match the graph")
        if part_of.size and (part_of.min() < 0 or part_of.max() >= n_parts):
            raise PartitionError("partition id out of range")
        e = g.edge_list
        cut = np.flatnonzero(part_of[e[:, 0]] != part_of[e[:, 1]])
        ends = np.unique(e[cut].ravel())
        boundary = [ends[part_of[ends] == p] for p in range(n_parts)]
        return cls(part_of, int(n_parts), cut, boundary, g.edge_count)

    @property
    def sizes(self):
        return np.bincount(self.part_of, minlength=self.n_parts)

    @property
    def cut_fraction(self):
        return len(self.cut_edges) / self.edge_count if self.edge_count else 0.0

    @property
    def exchange_bits(self):
        """Bits sent per exchange: one per boundary p-bit."""
        return int(sum(len(b) for b in self.boundary_nodes))

    def to_text(self):
        return "".join(f"{i} {p}\n" for i, p in enumerate(self.part_of))


def size_bounds(n, P, imbalance=0.10):
    """Allowed part sizes [lo, hi] for a +-imbalance band around n/P."""
    if P < 1 or P > n:
        raise PartitionError(f"need 1 <= P <= {n}, got P={P}")
    lo = math.ceil((1 - imbalance) * n / P - 1e-9)
    hi = math.floor((1 + imbalance) * n / P + 1e-9)
    if lo > hi or lo * P > n or hi * P < n:
        raise PartitionError(f"no size assignment of {n} nodes into {P} parts within +-{imbalance:.0%}")
    return lo, hi


def _bfs_dist(g, sources):
    dist = np.full(g.node_count, -1, np.int64)
    q = deque()
    for s in sources:
        dist[s] = 0
        q.append(s)
    ip, ix = g.csr_indptr, g.csr_indices
    while q:
        u = q.popleft()
        for v in ix[ip[u]:ip[u + 1]]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def _spread_seeds(g, P, rng):
    seeds = [int(rng.integers(g.node_count))]
    while len(seeds) < P:
        d = _bfs_dist(g, seeds)
        d[d < 0] = np.iinfo(np.int64).max      # unreachable nodes first
        d[seeds] = -1
        seeds.append(int(np.argmax(d)))
    return seeds


def _grow(g, P, targets, rng):
    n = g.node_count
    ip, ix = g.csr_indptr, g.csr_indices
    part = np.full(n, -1, np.int64)
    conn = [dict() for _ in range(P)]
    heaps = [[] for _ in range(P)]
    size = np.zeros(P, np.int64)

    def take(p, u):
        part[u] = p
        size[p] += 1
        for v in ix[ip[u]:ip[u + 1]]:
            if part[v] < 0:
                c = conn[p].get(v, 0) + 1
                conn[p][v] = c
                heapq.heappush(heaps[p], (-c, int(v)))

    for p, s in enumerate(_spread_seeds(g, P, rng)):
        take(p, s)
    unassigned = n - P
    while unassigned:
        moved = False
        for p in range(P):
            if size[p] >= targets[p] or not unassigned:
                continue
            u = -1
            h = heaps[p]
            while h:
                c, v = heapq.heappop(h)
                if part[v] < 0 and conn[p].get(v) == -c:
                    u = v
                    break
            if u < 0:
                u = int(np.flatnonzero(part < 0)[0])   # region is walled in
            take(p, u)
            unassigned -= 1
            moved = True
        if not moved:
            raise PartitionError("growth stalled")
    return part


def _connections(g, part, P):
    e = g.edge_list
    c = np.zeros((g.node_count, P), np.int64)
    np.add.at(c, (e[:, 0], part[e[:, 1]]), 1)
    np.add.at(c, (e[:, 1], part[e[:, 0]]), 1)
    return c


def _move(g, conn, part, size, u, b):
    a = part[u]
    part[u] = b
    size[a] -= 1
    size[b] += 1
    nb = g.csr_indices[g.csr_indptr[u]:g.csr_indptr[u + 1]]
    np.subtract.at(conn, (nb, a), 1)
    np.add.at(conn, (nb, b), 1)


def _refine(g, part, P, lo, hi, max_passes=20, kl_candidates=16):
    size = np.bincount(part, minlength=P)
    conn = _connections(g, part, P)
    n = g.node_count
    adj = sp.csr_matrix((np.ones(len(g.csr_indices), np.int64), g.csr_indices, g.csr_indptr), shape=(n, n))
    for _ in range(max_passes):
        improved = 0
        # single boundary moves with strictly positive gain
        own = conn[np.arange(len(part)), part]
        cand = np.flatnonzero(conn.sum(axis=1) > own)
        gains = []
        for u in cand:
            row = conn[u].copy()
            row[part[u]] = -1
            b = int(np.argmax(row))
            gains.append((-(row[b] - conn[u, part[u]]), int(u)))
        gains.sort()
        for _, u in gains:
            a = part[u]
            row = conn[u].copy()
            row[a] = -1
            b = int(np.argmax(row))
            if row[b] - conn[u, a] > 0 and size[a] > lo and size[b] < hi:
                _move(g, conn, part, size, u, b)
                improved += 1
        # Kernighan-Lin swaps between part pairs, size-neutral
        for a in range(P):
            for b in range(a + 1, P):
                while True:
                    ua = np.flatnonzero((part == a) & (conn[:, b] > 0))
                    ub = np.flatnonzero((part == b) & (conn[:, a] > 0))
                    if not len(ua) or not len(ub):
                        break
                    ga = conn[ua, b] - conn[ua, a]
                    gb = conn[ub, a] - conn[ub, b]
                    ua = ua[np.argsort(-ga, kind="stable")[:kl_candidates]]
                    ub = ub[np.argsort(-gb, kind="stable")[:kl_candidates]]
                    ga = conn[ua, b] - conn[ua, a]
                    gb = conn[ub, a] - conn[ub, b]
                    link = adj[ua][:, ub].toarray()
                    total = ga[:, None] + gb[None, :] - 2 * link
                    k = int(np.argmax(total))
                    if total.flat[k] <= 0:
                        break
                    i, j = divmod(k, len(ub))
                    _move(g, conn, part, size, ua[i], b)
                    _move(g, conn, part, size, ub[j], a)
                    improved += 1
        if not improved:
            break
    return part


def partition_graph(g, P, seed=0, imbalance=0.10):
    """Balanced P-way partition with a small edge cut; deterministic per seed."""
    n = g.node_count
    lo, hi = size_bounds(n, P, imbalance)
    if P == 1:
        return Partition.from_assignment(g, np.zeros(n, np.int64), 1)
    targets = [n // P + (1 if p < n % P else 0) for p in range(P)]
    rng = np.random.default_rng(seed)
    part = _grow(g, P, targets, rng)
    part = _refine(g, part, P, lo, hi)
    return Partition.from_assignment(g, part, P)


def read_partition(text, g):
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    part = np.full(g.node_count, -1, np.int64)
    for i, p in rows:
        part[int(i)] = int(p)
    if (part < 0).any():
        raise PartitionError("dump does not assign every node")
    return Partition.from_assignment(g, part, int(part.max()) + 1)


# ----- stale sampling ---------------------------------------------------------

@dataclass
class PartitionedChain:
    spins: np.ndarray
    shadow: np.ndarray
    states: np.ndarray               # (P, 4) per-partition xoshiro states
    rounds: int = 0
    sweeps: int = 0


def partitioned_chain(n_nodes, n_parts, seed=None, state=None, backend=None):
    """Initial spins and partition-0 stream exactly as ``new_chain``.

    Partition k > 0 draws from the base stream advanced by k long jumps, so
    the streams stay clear of the jump-derived substreams of the same seed.
    """
    base = seed_state(seed) if state is None else np.array(state, dtype=np.uint64)
    c = new_chain(n_nodes, state=base, backend=backend)
    states = np.empty((n_parts, 4), np.uint64)
    states[0] = c.rng
    for k in range(1, n_parts):
        states[k] = long_jumped(base, k)
    return PartitionedChain(c.spins, c.spins.copy(), states)


def stale_sweep(chain, partition, model, tau, n_rounds=1, record=False, live=False,
                beta=None, backend=None):
    """``n_rounds`` rounds of ``tau`` local sweeps per partition then one exchange.

    With ``live`` the shadow is bypassed (cross-partition reads see current
    spins), which is the exact reference for paired comparisons. Returns the
    state after each round when ``record`` is set.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1 (one sweep between exchanges at minimum)")
    net = as_network(model)
    b = net.beta if beta is None else beta
    if len(chain.states) != partition.n_parts:
        raise ValueError("chain has a different number of partition streams")
    impl = kernels.impl if backend is None else kernels.load_backend(backend)
    out = np.empty((n_rounds if record else 0, len(chain.spins)), np.int8)
    shadow = chain.spins if live else chain.shadow
    impl.stale_rounds(*net.kernel_args(), net.order, partition.part_of, chain.spins, shadow,
                      chain.states, b, int(tau), int(n_rounds), out)
    if live:
        chain.shadow[:] = chain.spins
    chain.rounds += n_rounds
    chain.sweeps += n_rounds * tau
    return out if record else None


def stale_samples(model, partition, tau, n_samples, seed, burn_in=0, live=False, backend=None):
    """States recorded after each exchange; burn-in is counted in sweeps."""
    net = as_network(model)
    ch = partitioned_chain(net.graph.node_count, partition.n_parts, seed, backend=backend)
    if burn_in:
        stale_sweep(ch, partition, net, tau, -(-burn_in // tau), live=live, backend=backend)
    return stale_sweep(ch, partition, net, tau, n_samples, record=True, live=live, backend=backend)


def staleness_bias_scan(model, partition, taus, n_sweeps, seed=0, burn_in=100, bins=50, backend=None):
    """Paired stale-vs-live estimates of the mean network energy for each tau.

    Both runs share streams and start state, so a cut-free partition gives a
    deviation of exactly zero. Each tau uses ``n_sweeps // tau`` rounds.
    Returns rows ``(tau, deviation, stderr)``.
    """
    net = as_network(model)
    rows = []
    for tau in taus:
        n = max(bins, n_sweeps // tau)
        es = net.energy(stale_samples(net, partition, tau, n, seed, burn_in, False, backend))
        el = net.energy(stale_samples(net, partition, tau, n, seed, burn_in, True, backend))
        d = es - el
        rows.append((int(tau), float(d.mean()), blocking_se(d, bins) if d.any() else 0.0))
    return rows


def scan_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "deviation", "stderr"])
    for tau, dev, se in rows:
        w.writerow([tau, repr(dev), repr(se)])
    return buf.getvalue()
