"""Periodic square-lattice geometry, interlayer masks, TFIM bonds, colorings."""
from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

VISIBLE, HIDDEN, DEEP = 0, 1, 2
LAYER_NAMES = ("visible", "hidden", "deep")


class LatticeError(ValueError):
    pass


class DegenerateLatticeError(LatticeError):
    """L=2 torus: the two neighbours along an axis coincide."""


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    periodic: bool = True

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise LatticeError(f"L must be an integer >= 2, got {self.L}")
        if not self.periodic:
            raise LatticeError("only periodic lattices are supported")

    @property
    def N(self):
        return self.L * self.L

    def coords(self, site):
        return divmod(site, self.L)

    def site(self, row, col):
        return (row % self.L) * self.L + (col % self.L)


def _torus_delta(a, b, L):
    d = abs(a - b) % L
    return min(d, L - d)


def torus_distance(p, q, L):
    """Minimum-image Euclidean distance between two sites of an L x L torus."""
    dx = _torus_delta(p[0], q[0], L)
    dy = _torus_delta(p[1], q[1], L)
    return math.hypot(dx, dy)


def _torus_dist2(p, q, L):
    dx = _torus_delta(p[0], q[0], L)
    dy = _torus_delta(p[1], q[1], L)
    return dx * dx + dy * dy


class SparseGraph:
    """Undirected graph stored as a sorted edge list plus CSR adjacency.

    ``csr_edge[p]`` is the edge id of the p-th CSR entry, so per-edge data
    (weights) can be looked up from either end.
    """

    def __init__(self, node_count, edges, node_layer=None):
        self.node_count = int(node_count)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.node_count:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            edges = np.stack([lo, hi], axis=1)
            key = lo * self.node_count + hi
            if len(np.unique(key)) != len(key):
                raise ValueError("duplicate edges")
        self.edge_list = edges
        if node_layer is None:
            node_layer = np.zeros(self.node_count, dtype=np.int8)
        self.node_layer = np.asarray(node_layer, dtype=np.int8)
        self._build_csr()

    def _build_csr(self):
        n, e = self.node_count, self.edge_list
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(len(e)), np.arange(len(e))]).astype(np.int64)
        order = np.lexsort((dst, src))
        self.csr_indices = np.ascontiguousarray(dst[order], dtype=np.int64)
        self.csr_edge = np.ascontiguousarray(eid[order], dtype=np.int64)
        counts = np.bincount(src, minlength=n)
        self.csr_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.csr_indptr[1:])

    @property
    def edge_count(self):
        return len(self.edge_list)

    def neighbors(self, i):
        return self.csr_indices[self.csr_indptr[i]:self.csr_indptr[i + 1]]

    @property
    def adjacency(self):
        return [self.neighbors(i) for i in range(self.node_count)]

    def degrees(self):
        return np.diff(self.csr_indptr)

    def to_edge_text(self):
        return "".join(f"{i} {j}\n" for i, j in self.edge_list)


def _radius_sq_bound(k):
    # d^2 <= k^2 on integer d^2, with k^2 taken as an exact rational
    kk = Fraction(k).limit_denominator(10**6) ** 2
    return math.floor(kk)


def mask_offsets(k):
    """Integer offsets (dx, dy) with dx^2 + dy^2 <= k^2, row-major order."""
    r2 = _radius_sq_bound(k)
    r = math.isqrt(r2)
    return [(dx, dy) for dx in range(-r, r + 1) for dy in range(-r, r + 1) if dx * dx + dy * dy <= r2]


def interlayer_pairs(L, k):
    """Sorted (i, j) site pairs of the radius-k mask between two L x L layers."""
    if L < 2:
        raise LatticeError("L must be >= 2")
    if k < 0:
        raise LatticeError("radius k must be non-negative")
    if 2 * Fraction(k).limit_denominator(10**6) >= L:
        raise LatticeError(f"radius k={k} must be < L/2={L / 2}: the mask would overlap itself through the wrap")
    offs = mask_offsets(k)
    pairs = []
    for i in range(L * L):
        r, c = divmod(i, L)
        for dx, dy in offs:
            pairs.append((i, ((r + dx) % L) * L + (c + dy) % L))
    pairs = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return pairs


def build_interlayer_mask(L, k):
    """Bipartite graph: layer A nodes 0..N-1, layer B nodes N..2N-1."""
    N = L * L
    pairs = interlayer_pairs(L, k)
    edges = pairs.copy()
    edges[:, 1] += N
    layer = np.array([0] * N + [1] * N, dtype=np.int8)
    return SparseGraph(2 * N, edges, layer)


def build_tfim_bonds(L):
    """The 2N unique nearest-neighbour bonds of the L x L torus."""
    if L == 2:
        raise DegenerateLatticeError("L=2 torus double-counts every bond through the wrap")
    if L < 2:
        raise LatticeError("L must be >= 3")
    bonds = []
    for i in range(L * L):
        r, c = divmod(i, L)
        for j in (r * L + (c + 1) % L, ((r + 1) % L) * L + c):
            bonds.append((min(i, j), max(i, j)))
    return np.array(sorted(bonds), dtype=np.int64)


@dataclass(frozen=True)
class Coloring:
    color_of: np.ndarray
    num_colors: int

    def classes(self):
        return [np.flatnonzero(self.color_of == c) for c in range(self.num_colors)]

    def is_proper(self, g):
        e = g.edge_list
        return bool(np.all(self.color_of[e[:, 0]] != self.color_of[e[:, 1]])) if len(e) else True


def greedy_color(g):
    """First-fit coloring in node-index order."""
    color = np.full(g.node_count, -1, dtype=np.int64)
    for i in range(g.node_count):
        used = {int(color[j]) for j in g.neighbors(i) if color[j] >= 0}
        c = 0
        while c in used:
            c += 1
        color[i] = c
    n = int(color.max()) + 1 if g.node_count else 0
    return Coloring(color, n)
