"""Inner loops: ARW trajectory stepping, Z-chain stepping, exhaustive Cheeger search.

Every kernel exists twice: a numba ``@njit`` version (``*_nb``) and a plain
numpy version (``*_np``) with the same signature and the same consumption of
pre-drawn uniforms, so both backends walk identical trajectories for a seed.
Callers go through the dispatchers at the bottom of the module.
"""

from __future__ import annotations

import numpy as np

from . import _accel

MODE_FINITE = 0
MODE_NEG_INF = 1

if _accel.HAS_NUMBA:
    from numba import njit
else:  # pragma: no cover
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


# ---------------------------------------------------------------------------
# ARW chain
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def arw_run_nb(x, pos, indptr, indices, scale, mode, lazy, u, t0, stride, out, w):
    n = pos.shape[0]
    steps = u.shape[0]
    row = 0
    for s in range(steps):
        if not (lazy and u[s, 2] < 0.5):
            idx = int(u[s, 0] * n)
            if idx >= n:
                idx = n - 1
            i = pos[idx]
            start = indptr[i]
            deg = indptr[i + 1] - start
            if mode == MODE_FINITE:
                # slot 0 is the stay option, slots 1..deg the neighbours
                w[0] = scale * (x[i] - 1)
                wmax = w[0]
                for a in range(deg):
                    w[a + 1] = scale * x[indices[start + a]]
                    if w[a + 1] > wmax:
                        wmax = w[a + 1]
                total = 0.0
                for a in range(deg + 1):
                    total += np.exp(w[a] - wmax)
                    w[a] = total
                target = u[s, 1] * total
                choice = deg
                for a in range(deg + 1):
                    if target < w[a]:
                        choice = a
                        break
            else:
                best = x[i] - 1
                count = 1
                for a in range(deg):
                    c = x[indices[start + a]]
                    if c < best:
                        best = c
                        count = 1
                    elif c == best:
                        count += 1
                pick = int(u[s, 1] * count)
                if pick >= count:
                    pick = count - 1
                choice = -1
                seen = 0
                if x[i] - 1 == best:
                    if pick == 0:
                        choice = 0
                    seen = 1
                if choice < 0:
                    for a in range(deg):
                        if x[indices[start + a]] == best:
                            if seen == pick:
                                choice = a + 1
                                break
                            seen += 1
            if choice > 0:
                j = indices[start + choice - 1]
                x[i] -= 1
                x[j] += 1
                pos[idx] = j
        if (t0 + s + 1) % stride == 0:
            for v in range(x.shape[0]):
                out[row, v] = x[v]
            row += 1
    return row


def arw_run_np(x, pos, indptr, indices, scale, mode, lazy, u, t0, stride, out, w):
    n = pos.shape[0]
    row = 0
    for s in range(u.shape[0]):
        if not (lazy and u[s, 2] < 0.5):
            idx = min(int(u[s, 0] * n), n - 1)
            i = pos[idx]
            nbrs = indices[indptr[i]:indptr[i + 1]]
            counts = np.concatenate(([x[i] - 1], x[nbrs]))
            if mode == MODE_FINITE:
                logits = scale * counts
                cdf = np.cumsum(np.exp(logits - logits.max()))
                choice = int(np.searchsorted(cdf, u[s, 1] * cdf[-1], side="right"))
                choice = min(choice, len(nbrs))
            else:
                argmin = np.flatnonzero(counts == counts.min())
                choice = int(argmin[min(int(u[s, 1] * len(argmin)), len(argmin) - 1)])
            if choice > 0:
                j = nbrs[choice - 1]
                x[i] -= 1
                x[j] += 1
                pos[idx] = j
        if (t0 + s + 1) % stride == 0:
            out[row] = x
            row += 1
    return row


# ---------------------------------------------------------------------------
# Z comparison chain (n independent particles on the line 0..D)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def zchain_run_nb(counts, p, q, u, threshold, t0, stride, out):
    D = counts.shape[0] - 1
    n = 0
    for d in range(D + 1):
        n += counts[d]
    row = 0
    for s in range(u.shape[0]):
        target = u[s, 0] * n
        d = D
        acc = 0.0
        for c in range(D + 1):
            acc += counts[c]
            if target < acc:
                d = c
                break
        if d <= 1:
            left, p_left = 0, q
        else:
            left, p_left = d - 1, p
        right = d + 1 if d < D else D
        dest = left if u[s, 1] < p_left else right
        counts[d] -= 1
        counts[dest] += 1
        if stride > 0 and (t0 + s + 1) % stride == 0:
            out[row] = counts[0]
            row += 1
        if threshold >= 0 and counts[0] <= threshold:
            return s + 1, row
    return -1, row


def zchain_run_np(counts, p, q, u, threshold, t0, stride, out):
    D = counts.shape[0] - 1
    n = int(counts.sum())
    row = 0
    cdf = np.cumsum(counts).astype(np.float64)
    for s in range(u.shape[0]):
        d = min(int(np.searchsorted(cdf, u[s, 0] * n, side="right")), D)
        if d <= 1:
            left, p_left = 0, q
        else:
            left, p_left = d - 1, p
        right = min(d + 1, D)
        dest = left if u[s, 1] < p_left else right
        if dest != d:
            counts[d] -= 1
            counts[dest] += 1
            cdf = np.cumsum(counts).astype(np.float64)
        if stride > 0 and (t0 + s + 1) % stride == 0:
            out[row] = counts[0]
            row += 1
        if threshold >= 0 and counts[0] <= threshold:
            return s + 1, row
    return -1, row


# ---------------------------------------------------------------------------
# Exhaustive Cheeger search
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def cheeger_search_nb(Q, pi, half):
    m = pi.shape[0]
    out_mass = np.zeros(m)
    for a in range(m):
        for b in range(m):
            if a != b:
                out_mass[a] += Q[a, b]
    col = np.zeros(m)  # col[y] = Q(S, y)
    row = np.zeros(m)  # row[x] = Q(x, S)
    member = np.zeros(m, dtype=np.bool_)
    boundary = 0.0
    pi_s = 0.0
    best = np.inf
    best_mask = 0
    mask = 0
    total = 1 << m
    for g in range(1, total):
        e = 0
        while not (g >> e) & 1:
            e += 1
        mask ^= 1 << e
        if (g & 1023) == 0:
            for a in range(m):
                member[a] = (mask >> a) & 1
            pi_s = 0.0
            boundary = 0.0
            for a in range(m):
                col[a] = 0.0
                row[a] = 0.0
            for a in range(m):
                if member[a]:
                    pi_s += pi[a]
                    for b in range(m):
                        col[b] += Q[a, b]
                        row[b] += Q[b, a]
                        if not member[b]:
                            boundary += Q[a, b]
        elif not member[e]:
            boundary += (out_mass[e] - row[e]) - col[e]
            for b in range(m):
                col[b] += Q[e, b]
                row[b] += Q[b, e]
            member[e] = True
            pi_s += pi[e]
        else:
            for b in range(m):
                col[b] -= Q[e, b]
                row[b] -= Q[b, e]
            member[e] = False
            pi_s -= pi[e]
            boundary -= (out_mass[e] - row[e]) - col[e]
        if pi_s > 0.0 and pi_s <= half:
            val = boundary / pi_s
            if val < best:
                best = val
                best_mask = mask
    return best, best_mask


def cheeger_search_np(Q, pi, half, chunk=1 << 15):
    m = pi.shape[0]
    bits = np.arange(m, dtype=np.int64)
    best = np.inf
    best_mask = 0
    for lo in range(1, 1 << m, chunk):
        masks = np.arange(lo, min(lo + chunk, 1 << m), dtype=np.int64)
        member = ((masks[:, None] >> bits) & 1).astype(np.float64)
        pi_s = member @ pi
        boundary = ((member @ Q) * (1.0 - member)).sum(axis=1)
        ok = (pi_s > 0.0) & (pi_s <= half)
        if not ok.any():
            continue
        vals = np.where(ok, boundary / np.where(ok, pi_s, 1.0), np.inf)
        a = int(np.argmin(vals))
        if vals[a] < best:
            best = float(vals[a])
            best_mask = int(masks[a])
    return best, best_mask


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def arw_run(*args):
    fn = arw_run_nb if _accel.backend() == "numba" else arw_run_np
    return fn(*args)


def zchain_run(*args):
    fn = zchain_run_nb if _accel.backend() == "numba" else zchain_run_np
    return fn(*args)


def cheeger_search(Q, pi, half):
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    pi = np.ascontiguousarray(pi, dtype=np.float64)
    fn = cheeger_search_nb if _accel.backend() == "numba" else cheeger_search_np
    return fn(Q, pi, float(half))
