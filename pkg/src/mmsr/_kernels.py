"""Compiled inner loops of the evaluator.

Loads are an ``(G + 1, K)`` integer array whose last row is the neutral
load (the cycle time at every station); a negative token selects it.

A reinsertion plan is passed *packed* as ``[m, t_1..t_m, g_1..g_m,
s_1..s_(f-m)]``: ``m`` inserts sorted by ``(t, g)`` followed by the
skipped gids in ascending order, ``f`` being the scenario's failed count.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _fill_tokens(out, first, exist, packed, nf):
    m = packed[0]
    n = first.shape[0]
    k = 0
    j = 0
    for p in range(n):
        while k < m and packed[1 + k] <= p + 1:
            out[j] = packed[1 + m + k]
            j += 1
            k += 1
        v = first[p]
        if exist[v]:
            out[j] = v
            j += 1
    while k < m:
        out[j] = packed[1 + m + k]
        j += 1
        k += 1
    for i in range(nf - m):
        out[j] = -packed[1 + 2 * m + i] - 1
        j += 1
    return j


@njit(cache=True)
def _step(z, tok, is_last, loads, lengths, c, out_z):
    K = lengths.shape[0]
    row = tok if tok >= 0 else loads.shape[0] - 1
    wt = 0
    for k in range(K):
        x = z[k] + loads[row, k]
        if is_last:
            if x > c:
                wt += x - c
            out_z[k] = 0
        else:
            if x > lengths[k]:
                wt += x - lengths[k]
                x = lengths[k]
            out_z[k] = x - c if x > c else 0
    return wt


@njit(cache=True)
def evaluate_all(first, exist, packed, nfailed, lens, loads, lengths, c):
    """Full sweep of every scenario.

    Returns ``finals (N, Lmax)``, ``zs (N, Lmax + 1, K)`` (offset before
    each position), ``wpos (N, Lmax)`` and ``totals (N,)``.
    """
    N = exist.shape[0]
    K = lengths.shape[0]
    Lmax = 0
    for w in range(N):
        if lens[w] > Lmax:
            Lmax = lens[w]
    finals = np.zeros((N, Lmax), np.int64)
    zs = np.zeros((N, Lmax + 1, K), np.int64)
    wpos = np.zeros((N, Lmax), np.int64)
    totals = np.zeros(N, np.int64)
    for w in range(N):
        L = _fill_tokens(finals[w], first, exist[w], packed[w], nfailed[w])
        t = 0
        for i in range(L):
            wt = _step(zs[w, i], finals[w, i], i == L - 1, loads, lengths, c, zs[w, i + 1])
            wpos[w, i] = wt
            t += wt
        totals[w] = t
    return finals, zs, wpos, totals


@njit(cache=True)
def apply(first, exist, packed, nfailed, lens, scen, finals, zs, wpos, totals,
          loads, lengths, c, write):
    """Overload change of each scenario in ``scen`` for new ``first``/``packed``.

    Only the span from the first changed token is re-swept, stopping once
    past the last changed token and the offsets rejoin the cached ones.
    With ``write`` the cached arrays are updated in place.
    """
    K = lengths.shape[0]
    buf = np.empty(finals.shape[1], np.int64)
    zn = np.empty(K, np.int64)
    deltas = np.zeros(scen.shape[0], np.int64)
    for a in range(scen.shape[0]):
        w = scen[a]
        L = lens[w]
        _fill_tokens(buf, first, exist[w], packed[w], nfailed[w])
        old = finals[w]
        s = 0
        while s < L and buf[s] == old[s]:
            s += 1
        if s == L:
            continue
        e = L - 1
        while buf[e] == old[e]:
            e -= 1
        z = zs[w, s].copy()
        delta = 0
        i = s
        while i < L:
            wt = _step(z, buf[i], i == L - 1, loads, lengths, c, zn)
            delta += wt - wpos[w, i]
            if write:
                wpos[w, i] = wt
            i += 1
            same = True
            for k in range(K):
                if zn[k] != zs[w, i, k]:
                    same = False
                    break
            if not same and write:
                for k in range(K):
                    zs[w, i, k] = zn[k]
            for k in range(K):
                z[k] = zn[k]
            if same and i > e:
                break
        deltas[a] = delta
        if write:
            for i in range(s, e + 1):
                finals[w, i] = buf[i]
            totals[w] += delta
    return deltas
