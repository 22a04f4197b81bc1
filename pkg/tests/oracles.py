"""Slow, direct reference implementations used as test oracles.

Nothing here shares code with the package beyond the Graph type.
"""

import itertools
import math

import mpmath
import numpy as np
import scipy.linalg


def compositions(k, n):
    return sorted(c for c in itertools.product(range(n + 1), repeat=k) if sum(c) == n)


def naive_step_law(g, n, beta, x, lazy=False):
    out = {}
    for i in range(g.k):
        if x[i] == 0:
            continue
        cands = [i, *g.adjacency[i]]
        w = [math.exp(beta / n * (x[i] - 1))] + [math.exp(beta / n * x[j]) for j in g.adjacency[i]]
        Z = sum(w)
        for j, wj in zip(cands, w):
            y = list(x)
            y[i] -= 1
            y[j] += 1
            y = tuple(y)
            out[y] = out.get(y, 0.0) + x[i] / n * wj / Z
    if lazy:
        out = {y: 0.5 * p for y, p in out.items()}
        out[tuple(x)] = out.get(tuple(x), 0.0) + 0.5
    return out


def naive_matrix(g, n, beta, lazy=False):
    states = compositions(g.k, n)
    idx = {s: a for a, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for s in states:
        for y, p in naive_step_law(g, n, beta, s, lazy).items():
            P[idx[s], idx[y]] += p
    return states, P


def eig_stationary(P):
    """Left Perron vector from a dense eigendecomposition."""
    w, vl = scipy.linalg.eig(P, left=True, right=False)
    v = np.real(vl[:, np.argmin(np.abs(w - 1.0))])
    return v / v.sum()


def mp_stationary(P, dps=50):
    """Stationary vector by a high-precision linear solve (for tolerances near 1e-12)."""
    m = P.shape[0]
    with mpmath.workdps(dps):
        A = mpmath.matrix(P.T.tolist()) - mpmath.eye(m)
        for j in range(m):
            A[m - 1, j] = 1
        b = mpmath.matrix([0] * (m - 1) + [1])
        x = mpmath.lu_solve(A, b)
        return np.array([float(v) for v in x])


def complete_stationary_direct(k, n, beta):
    """Multinomial times exp(beta/(2n) sum x^2), in plain floats."""
    states = compositions(k, n)
    w = np.array([
        math.factorial(n) / math.prod(math.factorial(v) for v in s) * math.exp(beta / (2 * n) * sum(v * v for v in s))
        for s in states
    ])
    return w / w.sum()


def brute_mixing_time(P, pi, eps, t_max=10**6):
    Pt = np.eye(P.shape[0])
    for t in range(t_max + 1):
        if 0.5 * np.abs(Pt - pi).sum(axis=1).max() <= eps:
            return t
        Pt = Pt @ P
    raise RuntimeError("no mixing within t_max")


def brute_cheeger(P, pi):
    m = len(pi)
    Q = pi[:, None] * P
    best = math.inf
    for r in range(1, m):
        for S in itertools.combinations(range(m), r):
            S = list(S)
            if pi[S].sum() > 0.5 + 1e-12:
                continue
            Sc = [a for a in range(m) if a not in S]
            best = min(best, Q[np.ix_(S, Sc)].sum() / pi[S].sum())
    return best


def meeting_times_ordered(g):
    """E[meeting time] of two independent lazy-uniform walks via the ordered-pair chain."""
    k = g.k
    Q = np.zeros((k, k))
    for i, nb in enumerate(g.adjacency):
        for j in (i, *nb):
            Q[i, j] = 1.0 / (len(nb) + 1)
    pairs = [(a, b) for a in range(k) for b in range(k) if a != b]
    idx = {p: r for r, p in enumerate(pairs)}
    T = np.zeros((len(pairs), len(pairs)))
    for (a, b), r in idx.items():
        for c in range(k):
            for d in range(k):
                if c != d:
                    T[r, idx[(c, d)]] += Q[a, c] * Q[b, d]
    h = np.linalg.solve(np.eye(len(pairs)) - T, np.ones(len(pairs)))
    out = np.zeros((k, k))
    for (a, b), r in idx.items():
        out[a, b] = h[r]
    return out
