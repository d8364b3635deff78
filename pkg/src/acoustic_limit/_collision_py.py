"""Pure numpy implementation of the collision sweeps.

Used when the compiled core is unavailable or when ``ACOUSTIC_LIMIT_PURE=1``.
The class/box description of the tables is expanded into explicit triples,
processed in chunks, and scattered back with sparse indicator matrices.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

CHUNK = 1 << 15


def _interp(G, p, st, fr, axes):
    # nested lerps keep constants exact: a + f*(b - a) == a when b == a
    if not axes:
        return G[p]
    j = axes[0]
    a = _interp(G, p, st, fr, axes[1:])
    b = _interp(G, p + st[:, j], st, fr, axes[1:])
    return a + fr[:, j, None] * (b - a)


def _chunks(plan):
    cache = plan.cache.setdefault("py_chunks", [])
    if cache:
        return cache
    tk, tc = plan.active_triples()
    K = plan.K
    for s in range(0, tk.size, CHUNK):
        k = tk[s:s + CHUNK]
        c = tc[s:s + CHUNK]
        S = sp.csr_matrix((np.ones(k.size), (k, np.arange(k.size))), shape=(K, k.size))
        ax1 = tuple(j for j in range(3) if np.any(plan.st1[c, j]))
        ax2 = tuple(j for j in range(3) if np.any(plan.st2[c, j]))
        cache.append((k, c, S, ax1, ax2))
    return cache


def _terms(G, plan, k, c, ax1, ax2):
    k1 = k + plan.koff[c]
    I1 = _interp(G, k + plan.base1[c], plan.st1[c], plan.fr1[c], ax1)
    I2 = _interp(G, k + plan.base2[c], plan.st2[c], plan.fr2[c], ax2)
    return k1, I1 * I2, G[k] * G[k1]


def collide_raw(G, plan):
    G = np.ascontiguousarray(G, dtype=float)
    out = np.zeros_like(G)
    w = plan.w
    for k, c, S, ax1, ax2 in _chunks(plan):
        k1, gain, loss = _terms(G, plan, k, c, ax1, ax2)
        out += S @ ((plan.coef[c] * w[k1])[:, None] * (gain - loss))
    return out


def dissipation_sum(G, plan, floor):
    G = np.ascontiguousarray(G, dtype=float)
    acc = np.zeros(G.shape[1])
    w = plan.w
    for k, c, S, ax1, ax2 in _chunks(plan):
        k1, t1, t0 = _terms(G, plan, k, c, ax1, ax2)
        t1 = np.maximum(t1, floor)
        t0 = np.maximum(t0, floor)
        acc += (plan.coef[c] * w[k1] * w[k]) @ ((t1 - t0) * np.log(t1 / t0))
    return acc
