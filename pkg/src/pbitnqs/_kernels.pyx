# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels.

Every routine here has a line-for-line twin in ``_pykernels.py``; the two
must consume the random stream identically and produce bit-identical output.
"""
from libc.math cimport tanh, exp
from libc.stdint cimport uint64_t, int64_t, int8_t

cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline double next_uniform(uint64_t* s) noexcept nogil:
    cdef uint64_t result = rotl(s[0] + s[3], 23) + s[0]
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = rotl(s[3], 45)
    return <double>(result >> 11) * INV_2_53


cdef inline void load(uint64_t* s, uint64_t[::1] st) noexcept nogil:
    s[0] = st[0]; s[1] = st[1]; s[2] = st[2]; s[3] = st[3]


cdef inline void save(uint64_t* s, uint64_t[::1] st) noexcept nogil:
    st[0] = s[0]; st[1] = s[1]; st[2] = s[2]; st[3] = s[3]


cdef inline void update_node(int64_t i, const int64_t* indptr, const int64_t* indices,
                             const int64_t* eidx, const double* w, const double* bias,
                             int8_t* spins, double beta, uint64_t* s) noexcept nogil:
    cdef double field = bias[i]
    cdef int64_t p
    for p in range(indptr[i], indptr[i + 1]):
        field = field + w[eidx[p]] * spins[indices[p]]
    cdef double r = 2.0 * next_uniform(s) - 1.0
    if tanh(beta * field) > r:
        spins[i] = 1
    else:
        spins[i] = -1


def next_u64_block(uint64_t[::1] state, uint64_t[::1] out):
    """Fill ``out`` with raw 64-bit outputs (test hook)."""
    cdef uint64_t s[4]
    cdef Py_ssize_t k
    cdef uint64_t result, t
    load(s, state)
    for k in range(out.shape[0]):
        result = rotl(s[0] + s[3], 23) + s[0]
        t = s[1] << 17
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        out[k] = result
    save(s, state)


def uniforms(uint64_t[::1] state, double[::1] out):
    cdef uint64_t s[4]
    cdef Py_ssize_t k
    load(s, state)
    for k in range(out.shape[0]):
        out[k] = next_uniform(s)
    save(s, state)


def sweeps(const int64_t[::1] indptr, const int64_t[::1] indices, const int64_t[::1] eidx,
           const double[::1] w, const double[::1] bias, const int64_t[::1] order,
           int8_t[::1] spins, uint64_t[::1] state, double beta, Py_ssize_t n_sweeps):
    """Run ``n_sweeps`` passes over ``order`` in place."""
    cdef uint64_t s[4]
    cdef Py_ssize_t t, q
    load(s, state)
    with nogil:
        for t in range(n_sweeps):
            for q in range(order.shape[0]):
                update_node(order[q], &indptr[0], &indices[0], &eidx[0], &w[0], &bias[0], &spins[0], beta, s)
    save(s, state)


def sample_chain(const int64_t[::1] indptr, const int64_t[::1] indices, const int64_t[::1] eidx,
                 const double[::1] w, const double[::1] bias, const int64_t[::1] order,
                 int8_t[::1] spins, uint64_t[::1] state, double beta,
                 Py_ssize_t burn_in, Py_ssize_t thin, int8_t[:, ::1] out):
    """Burn in, then record the full state every ``thin`` sweeps into ``out``."""
    cdef uint64_t s[4]
    cdef Py_ssize_t t, q, k, j
    cdef Py_ssize_t n = spins.shape[0]
    load(s, state)
    with nogil:
        for t in range(burn_in):
            for q in range(order.shape[0]):
                update_node(order[q], &indptr[0], &indices[0], &eidx[0], &w[0], &bias[0], &spins[0], beta, s)
        for k in range(out.shape[0]):
            for t in range(thin):
                for q in range(order.shape[0]):
                    update_node(order[q], &indptr[0], &indices[0], &eidx[0], &w[0], &bias[0], &spins[0], beta, s)
            for j in range(n):
                out[k, j] = spins[j]
    save(s, state)


def dual_stats(const int64_t[::1] indptr, const int64_t[::1] indices, const int64_t[::1] eidx,
               const double[::1] wq, const double[::1] biasq,
               const double[::1] wf, const double[::1] biasf,
               const int64_t[::1] order_aux, Py_ssize_t n_vis, const int64_t[:, ::1] edges,
               int8_t[:, ::1] configs, uint64_t[::1] state, double beta, Py_ssize_t n_c,
               double[:, ::1] p_flip, double[:, ::1] p_flip_sq,
               double[:, ::1] o_aux, double[:, ::1] o_edge, double clip):
    """Clamped-chain accumulators for every row of ``configs``.

    Rows are full network states; the visible block stays fixed while the
    auxiliary block evolves under ``(wq, biasq)`` and is left at its final
    value. Visible fields use ``(wf, biasf)``. Returns the number of clipped
    exponents.
    """
    cdef uint64_t s[4]
    cdef Py_ssize_t row, t, q, i, e, j
    cdef Py_ssize_t n = configs.shape[1]
    cdef Py_ssize_t n_edges = edges.shape[0]
    cdef int64_t p
    cdef double field, x, x2, inv = 1.0 / n_c
    cdef long clipped = 0
    cdef int8_t* sp
    load(s, state)
    with nogil:
        for row in range(configs.shape[0]):
            sp = &configs[row, 0]
            for i in range(n_vis):
                p_flip[row, i] = 0.0
                p_flip_sq[row, i] = 0.0
            for j in range(n - n_vis):
                o_aux[row, j] = 0.0
            for e in range(n_edges):
                o_edge[row, e] = 0.0
            for t in range(n_c):
                for q in range(order_aux.shape[0]):
                    update_node(order_aux[q], &indptr[0], &indices[0], &eidx[0], &wq[0], &biasq[0], sp, beta, s)
                for i in range(n_vis):
                    field = biasf[i]
                    for p in range(indptr[i], indptr[i + 1]):
                        field = field + wf[eidx[p]] * sp[indices[p]]
                    x = -2.0 * field * sp[i]
                    # keep both exponents within +-clip with x2 = 2x, so p_sq >= p^2 survives
                    if x > 0.5 * clip or x < -0.5 * clip:
                        clipped += 1
                        x = min(max(x, -0.5 * clip), 0.5 * clip)
                    x2 = 2.0 * x
                    p_flip[row, i] += exp(x)
                    p_flip_sq[row, i] += exp(x2)
                for j in range(n - n_vis):
                    o_aux[row, j] += 0.5 * sp[n_vis + j]
                for e in range(n_edges):
                    o_edge[row, e] += 0.5 * sp[edges[e, 0]] * sp[edges[e, 1]]
            for i in range(n_vis):
                p_flip[row, i] *= inv
                p_flip_sq[row, i] *= inv
            for j in range(n - n_vis):
                o_aux[row, j] *= inv
            for e in range(n_edges):
                o_edge[row, e] *= inv
    save(s, state)
    return clipped


def stale_rounds(const int64_t[::1] indptr, const int64_t[::1] indices, const int64_t[::1] eidx,
                 const double[::1] w, const double[::1] bias, const int64_t[::1] order,
                 const int64_t[::1] part_of, int8_t[::1] spins, int8_t[::1] shadow,
                 uint64_t[:, ::1] states, double beta, Py_ssize_t tau, Py_ssize_t n_rounds,
                 int8_t[:, ::1] out):
    """Partitioned sweeps with boundary values frozen between exchanges.

    Each round: every partition runs ``tau`` sweeps over its own nodes, reading
    foreign neighbours from ``shadow``; then ``shadow`` is refreshed from
    ``spins``. If ``out`` has rows, the state after round k is written to row k.
    Passing ``spins`` itself as ``shadow`` gives live (non-stale) reads.
    """
    cdef uint64_t s[4]
    cdef Py_ssize_t n_parts = states.shape[0]
    cdef Py_ssize_t rnd, part, t, q, j
    cdef Py_ssize_t n = spins.shape[0]
    cdef int64_t i, p, nb
    cdef double field, r
    cdef bint record = out.shape[0] > 0
    for rnd in range(n_rounds):
        for part in range(n_parts):
            load(s, states[part])
            with nogil:
                for t in range(tau):
                    for q in range(order.shape[0]):
                        i = order[q]
                        if part_of[i] != part:
                            continue
                        field = bias[i]
                        for p in range(indptr[i], indptr[i + 1]):
                            nb = indices[p]
                            if part_of[nb] == part:
                                field = field + w[eidx[p]] * spins[nb]
                            else:
                                field = field + w[eidx[p]] * shadow[nb]
                        r = 2.0 * next_uniform(s) - 1.0
                        if tanh(beta * field) > r:
                            spins[i] = 1
                        else:
                            spins[i] = -1
            save(s, states[part])
        for j in range(n):
            shadow[j] = spins[j]
        if record:
            for j in range(n):
                out[rnd, j] = spins[j]
