"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Slow, but they draw random numbers in exactly the same order and evaluate
the same floating-point expressions, so outputs match bit for bit.
"""
import math

import numpy as np

from .rng import Xoshiro256pp


def _update_node(i, indptr, indices, eidx, w, bias, spins, beta, g):
    field = bias[i]
    for p in range(indptr[i], indptr[i + 1]):
        field = field + w[eidx[p]] * spins[indices[p]]
    r = 2.0 * g.uniform() - 1.0
    spins[i] = 1 if math.tanh(beta * field) > r else -1


def _lists(*arrays):
    return [a.tolist() for a in arrays]


def next_u64_block(state, out):
    g = Xoshiro256pp(state)
    for k in range(out.shape[0]):
        out[k] = g.next_u64()
    g.store(state)


def uniforms(state, out):
    g = Xoshiro256pp(state)
    for k in range(out.shape[0]):
        out[k] = g.uniform()
    g.store(state)


def sweeps(indptr, indices, eidx, w, bias, order, spins, state, beta, n_sweeps):
    g = Xoshiro256pp(state)
    ip, ix, ei, wl, bl, od = _lists(indptr, indices, eidx, w, bias, order)
    sp = spins.tolist()
    for _ in range(n_sweeps):
        for i in od:
            _update_node(i, ip, ix, ei, wl, bl, sp, beta, g)
    spins[:] = sp
    g.store(state)


def sample_chain(indptr, indices, eidx, w, bias, order, spins, state, beta, burn_in, thin, out):
    g = Xoshiro256pp(state)
    ip, ix, ei, wl, bl, od = _lists(indptr, indices, eidx, w, bias, order)
    sp = spins.tolist()
    for _ in range(burn_in):
        for i in od:
            _update_node(i, ip, ix, ei, wl, bl, sp, beta, g)
    for k in range(out.shape[0]):
        for _ in range(thin):
            for i in od:
                _update_node(i, ip, ix, ei, wl, bl, sp, beta, g)
        out[k] = sp
    spins[:] = sp
    g.store(state)


def dual_stats(indptr, indices, eidx, wq, biasq, wf, biasf, order_aux, n_vis, edges,
               configs, state, beta, n_c, p_flip, p_flip_sq, o_aux, o_edge, clip):
    g = Xoshiro256pp(state)
    ip, ix, ei, wql, bql, wfl, bfl, od = _lists(indptr, indices, eidx, wq, biasq, wf, biasf, order_aux)
    el = edges.tolist()
    n = configs.shape[1]
    n_aux = n - n_vis
    inv = 1.0 / n_c
    clipped = 0
    for row in range(configs.shape[0]):
        sp = configs[row].tolist()
        pf = [0.0] * n_vis
        pq = [0.0] * n_vis
        oa = [0.0] * n_aux
        oe = [0.0] * len(el)
        for _ in range(n_c):
            for i in od:
                _update_node(i, ip, ix, ei, wql, bql, sp, beta, g)
            for i in range(n_vis):
                field = bfl[i]
                for p in range(ip[i], ip[i + 1]):
                    field = field + wfl[ei[p]] * sp[ix[p]]
                x = -2.0 * field * sp[i]
                if x > 0.5 * clip or x < -0.5 * clip:
                    clipped += 1
                    x = min(max(x, -0.5 * clip), 0.5 * clip)
                x2 = 2.0 * x
                pf[i] += math.exp(x)
                pq[i] += math.exp(x2)
            for j in range(n_aux):
                oa[j] += 0.5 * sp[n_vis + j]
            for e, (u, v) in enumerate(el):
                oe[e] += 0.5 * sp[u] * sp[v]
        p_flip[row] = [x * inv for x in pf]
        p_flip_sq[row] = [x * inv for x in pq]
        o_aux[row] = [x * inv for x in oa]
        o_edge[row] = [x * inv for x in oe]
        configs[row] = sp
    g.store(state)
    return clipped


def stale_rounds(indptr, indices, eidx, w, bias, order, part_of, spins, shadow,
                 states, beta, tau, n_rounds, out):
    ip, ix, ei, wl, bl, od, po = _lists(indptr, indices, eidx, w, bias, order, part_of)
    live = np.shares_memory(spins, shadow)
    sp = spins.tolist()
    sh = sp if live else shadow.tolist()
    gens = [Xoshiro256pp(st) for st in states]
    for rnd in range(n_rounds):
        for part, g in enumerate(gens):
            for _ in range(tau):
                for i in od:
                    if po[i] != part:
                        continue
                    field = bl[i]
                    for p in range(ip[i], ip[i + 1]):
                        nb = ix[p]
                        if po[nb] == part:
                            field = field + wl[ei[p]] * sp[nb]
                        else:
                            field = field + wl[ei[p]] * sh[nb]
                    r = 2.0 * g.uniform() - 1.0
                    sp[i] = 1 if math.tanh(beta * field) > r else -1
        if not live:
            sh = list(sp)
        if out.shape[0]:
            out[rnd] = sp
    spins[:] = sp
    if not live:
        shadow[:] = sh
    for st, g in zip(states, gens):
        g.store(st)
