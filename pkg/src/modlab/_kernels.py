"""Compiled inner loops: vertex-weighted shortest paths and dual ascent.

All path lengths include the weights of BOTH endpoint cells, matching the
set-sum length of a discrete curve. Kernels are deterministic: fixed
iteration orders, array-backed binary heaps, no threading inside a kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True, nogil=True, inline="always")
def _heap_push(hk, hv, size, key, val):
    i = size
    hk[i] = key
    hv[i] = val
    while i > 0:
        par = (i - 1) >> 1
        if hk[par] <= hk[i]:
            break
        hk[par], hk[i] = hk[i], hk[par]
        hv[par], hv[i] = hv[i], hv[par]
        i = par
    return size + 1


@njit(cache=True, nogil=True, inline="always")
def _heap_pop(hk, hv, size):
    key = hk[0]
    val = hv[0]
    size -= 1
    if size > 0:
        hk[0] = hk[size]
        hv[0] = hv[size]
        i = 0
        while True:
            l = 2 * i + 1
            if l >= size:
                break
            r = l + 1
            c = l
            if r < size and hk[r] < hk[l]:
                c = r
            if hk[i] <= hk[c]:
                break
            hk[i], hk[c] = hk[c], hk[i]
            hv[i], hv[c] = hv[c], hv[i]
            i = c
    return key, val, size


@njit(cache=True, nogil=True)
def dijkstra_ms(indptr, nbrs, rho, sources, allowed):
    """Multi-source vertex-weighted Dijkstra over an allowed-cell mask.

    dist[v] = min over allowed paths s..v of sum of rho over the path's
    cells (s and v included). parent[v] reconstructs one optimal path.
    """
    n = rho.size
    dist = np.full(n, INF)
    parent = np.full(n, -1, dtype=np.int64)
    settled = np.zeros(n, dtype=np.uint8)
    cap = nbrs.size + sources.size + 1
    hk = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    size = 0
    for idx in range(sources.size):
        s = sources[idx]
        if allowed[s] and rho[s] < dist[s]:
            dist[s] = rho[s]
            size = _heap_push(hk, hv, size, rho[s], s)
    while size > 0:
        key, v, size = _heap_pop(hk, hv, size)
        if settled[v] or key > dist[v]:
            continue
        settled[v] = 1
        for t in range(indptr[v], indptr[v + 1]):
            w = nbrs[t]
            if allowed[w] and not settled[w]:
                nd = key + rho[w]
                if nd < dist[w]:
                    dist[w] = nd
                    parent[w] = v
                    size = _heap_push(hk, hv, size, nd, w)
    return dist, parent


@njit(cache=True, nogil=True)
def far_scan(indptr, nbrs, rho, coords, d0sq, sources, threshold,
             best0, bu0, bw0):
    """Minimum path length over cell pairs at center distance >= d0.

    One early-aborting Dijkstra per source. A source's search stops as soon
    as the heap minimum reaches max(best-so-far, threshold); f_out[i] is the
    exact per-source minimum whenever exact[i] == 1 (searches that ran past
    all far targets or drained their heap). Lengths below `threshold` are
    always recorded exactly, which the caller uses for batched cuts.
    """
    n = rho.size
    dim = coords.shape[1]
    dist = np.full(n, INF)
    dist_ver = np.zeros(n, dtype=np.int64)
    settled_ver = np.zeros(n, dtype=np.int64)
    cap = nbrs.size + n + 1
    hk = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    nsrc = sources.size
    f_out = np.full(nsrc, INF)
    w_out = np.full(nsrc, -1, dtype=np.int64)
    exact = np.zeros(nsrc, dtype=np.uint8)
    best = best0
    bu = bu0
    bw = bw0
    for si in range(nsrc):
        u = sources[si]
        ver = si + 1
        bound = best if best > threshold else threshold
        size = 0
        dist[u] = rho[u]
        dist_ver[u] = ver
        size = _heap_push(hk, hv, size, rho[u], u)
        drained = True
        while size > 0:
            key, v, size = _heap_pop(hk, hv, size)
            if key >= bound:
                drained = False
                break
            if settled_ver[v] == ver or (dist_ver[v] == ver and key > dist[v]):
                continue
            settled_ver[v] = ver
            d2 = 0.0
            for d in range(dim):
                diff = coords[v, d] - coords[u, d]
                d2 += diff * diff
            if d2 >= d0sq:
                f_out[si] = key
                w_out[si] = v
                exact[si] = 1
                if key < best:
                    best = key
                    bu = u
                    bw = v
                    if best > threshold:
                        bound = best
                    else:
                        bound = threshold
                drained = False
                break
            for t in range(indptr[v], indptr[v + 1]):
                w = nbrs[t]
                if settled_ver[w] == ver:
                    continue
                nd = key + rho[w]
                if nd >= bound:
                    continue
                if dist_ver[w] != ver or nd < dist[w]:
                    dist[w] = nd
                    dist_ver[w] = ver
                    size = _heap_push(hk, hv, size, nd, w)
        if drained and exact[si] == 0:
            exact[si] = 1  # heap drained: no far cell reachable below bound
    return best, bu, bw, f_out, w_out, exact


@njit(cache=True, nogil=True)
def dijkstra_single_stop(indptr, nbrs, rho, source, coords, d0sq, allowed):
    """Single-source sweep stopping at the first settled far cell.

    Returns (length, far_cell, parent). far_cell is -1 when none reachable.
    """
    n = rho.size
    dim = coords.shape[1]
    dist = np.full(n, INF)
    parent = np.full(n, -1, dtype=np.int64)
    settled = np.zeros(n, dtype=np.uint8)
    cap = nbrs.size + n + 1
    hk = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    size = 0
    dist[source] = rho[source]
    size = _heap_push(hk, hv, size, rho[source], source)
    while size > 0:
        key, v, size = _heap_pop(hk, hv, size)
        if settled[v] or key > dist[v]:
            continue
        settled[v] = 1
        d2 = 0.0
        for d in range(dim):
            diff = coords[v, d] - coords[source, d]
            d2 += diff * diff
        if d2 >= d0sq:
            return key, v, parent
        for t in range(indptr[v], indptr[v + 1]):
            w = nbrs[t]
            if allowed[w] and not settled[w]:
                nd = key + rho[w]
                if nd < dist[w]:
                    dist[w] = nd
                    parent[w] = v
                    size = _heap_push(hk, hv, size, nd, w)
    return INF, -1, parent


@njit(cache=True, nogil=True)
def tube_dijkstra(indptr, nbrs, rho, member, allowed):
    """Layered shortest path: states (cell, matched-prefix-count).

    member[v, j] says cell v belongs to waypoint set j. Matching is greedy
    maximal (never worse than deferring). Accept states have all sets
    matched; the first settled accept state is the family minimum.
    """
    n = rho.size
    L = member.shape[1]
    ws = L + 1
    total = n * ws
    dist = np.full(total, INF)
    parent = np.full(total, -1, dtype=np.int64)
    settled = np.zeros(total, dtype=np.uint8)
    cap = nbrs.size * ws + total + 1
    hk = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    size = 0
    for v in range(n):
        if allowed[v] and member[v, 0]:
            j = 0
            while j < L and member[v, j]:
                j += 1
            st = v * ws + j
            if rho[v] < dist[st]:
                dist[st] = rho[v]
                size = _heap_push(hk, hv, size, rho[v], st)
    while size > 0:
        key, st, size = _heap_pop(hk, hv, size)
        if settled[st] or key > dist[st]:
            continue
        settled[st] = 1
        v = st // ws
        j = st % ws
        if j == L:
            return key, st, dist, parent
        for t in range(indptr[v], indptr[v + 1]):
            w = nbrs[t]
            if not allowed[w]:
                continue
            jj = j
            while jj < L and member[w, jj]:
                jj += 1
            nst = w * ws + jj
            if settled[nst]:
                continue
            nd = key + rho[w]
            if nd < dist[nst]:
                dist[nst] = nd
                parent[nst] = st
                size = _heap_push(hk, hv, size, nd, nst)
    return INF, -1, dist, parent


@njit(cache=True, nogil=True)
def ascent_sweeps(cptr, cvars, ccoef, lam, S, w, p, nsweeps):
    """Cyclic exact coordinate ascent on the Lagrangian dual.

    Variables may be cell orbits: row j constrains sum_t coef_t * x(var_t)
    >= 1 and the mass is sum_o w_o * x_o^p. Stationarity gives
    x_o = (S_o / (p w_o))^(1/(p-1)) with S_o the coefficient-weighted
    multiplier sum, and each lam[j] update is a monotone root-find for
    "row length = 1" clipped at lam[j] >= 0. Updates lam and S in place.
    """
    m = lam.size
    if p == 2.0:
        for _ in range(nsweeps):
            for j in range(m):
                a = cptr[j]
                b = cptr[j + 1]
                tot = 0.0
                slope = 0.0
                for t in range(a, b):
                    c = ccoef[t]
                    wo = w[cvars[t]]
                    tot += c * S[cvars[t]] / (2.0 * wo)
                    slope += c * c / (2.0 * wo)
                delta = (1.0 - tot) / slope
                if delta < -lam[j]:
                    delta = -lam[j]
                if delta != 0.0:
                    lam[j] += delta
                    for t in range(a, b):
                        S[cvars[t]] += ccoef[t] * delta
        return
    inv = 1.0 / (p - 1.0)
    for _ in range(nsweeps):
        for j in range(m):
            a = cptr[j]
            b = cptr[j + 1]
            # current length; the row is inactive when slack and lam[j] = 0
            l0 = 0.0
            for t in range(a, b):
                l0 += ccoef[t] * (S[cvars[t]] / (p * w[cvars[t]])) ** inv
            if (l0 >= 1.0 and lam[j] == 0.0) or abs(l0 - 1.0) < 1e-14:
                continue
            lo = -lam[j]
            llo = 0.0
            for t in range(a, b):
                sv = S[cvars[t]] + ccoef[t] * lo
                if sv < 0.0:
                    sv = 0.0
                llo += ccoef[t] * (sv / (p * w[cvars[t]])) ** inv
            if llo >= 1.0:
                delta = lo
            else:
                hi = 1.0
                for _d in range(64):
                    lh = 0.0
                    for t in range(a, b):
                        sv = S[cvars[t]] + ccoef[t] * hi
                        lh += ccoef[t] * (sv / (p * w[cvars[t]])) ** inv
                    if lh >= 1.0:
                        break
                    hi *= 2.0
                # safeguarded Newton on the monotone length-vs-delta curve
                d = 0.0 if (lo < 0.0 < hi and l0 < 1.0) else 0.5 * (lo + hi)
                for _it in range(24):
                    lv = 0.0
                    dv = 0.0
                    for t in range(a, b):
                        c = ccoef[t]
                        pw = p * w[cvars[t]]
                        sv = S[cvars[t]] + c * d
                        if sv < 0.0:
                            sv = 0.0
                        u = (sv / pw) ** inv
                        lv += c * u
                        if sv > 0.0:
                            dv += c * c * inv * u / sv
                    if lv < 1.0:
                        lo = d
                    else:
                        hi = d
                    if hi - lo <= 1e-13 * (1.0 + abs(hi)) or \
                            abs(lv - 1.0) < 1e-13:
                        break
                    if dv > 0.0:
                        dn = d + (1.0 - lv) / dv
                    else:
                        dn = 0.5 * (lo + hi)
                    if dn <= lo or dn >= hi:
                        dn = 0.5 * (lo + hi)
                    d = dn
                delta = hi
                if delta < -lam[j]:
                    delta = -lam[j]
            if delta != 0.0:
                lam[j] += delta
                for t in range(a, b):
                    S[cvars[t]] += ccoef[t] * delta
