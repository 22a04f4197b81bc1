"""Occupancy configurations and lexicographic enumeration of the state space."""

from __future__ import annotations

from math import comb

import numpy as np

from .graph import Graph

DEFAULT_CAP = 200_000


class StateSpaceTooLarge(ValueError):
    """The requested state space exceeds the enumeration cap; simulate instead."""


def space_size(k: int, n: int) -> int:
    return comb(n + k - 1, k - 1)


def _binom_table(n: int, k: int) -> np.ndarray:
    # table[a, b] = C(a, b) for a <= n + k, b <= k
    table = np.zeros((n + k + 1, k + 1), dtype=np.int64)
    for a in range(n + k + 1):
        for b in range(min(a, k) + 1):
            table[a, b] = comb(a, b)
    return table


class StateSpace:
    """All compositions of ``n`` particles into ``k`` vertices, in ascending lex order.

    ``states[r]`` is the configuration of rank ``r``. Ranks are computed
    combinatorially (hockey-stick sums of binomials), so no lookup table is
    needed for ``rank``/``unrank``.
    """

    def __init__(self, k: int, n: int, cap: int = DEFAULT_CAP):
        if k < 1 or n < 0:
            raise ValueError("need k >= 1 and n >= 0")
        size = space_size(k, n)
        if size > cap:
            raise StateSpaceTooLarge(
                f"|Omega| = C({n + k - 1},{k - 1}) = {size} exceeds cap {cap}; use simulation"
            )
        self.k = k
        self.n = n
        self.size = size
        self._binom = _binom_table(n, k)
        self.states = self._enumerate()
        self.states.setflags(write=False)

    def _enumerate(self) -> np.ndarray:
        k, n = self.k, self.n
        out = np.zeros((self.size, k), dtype=np.int64)
        row = 0
        x = [0] * k

        def rec(pos: int, remaining: int):
            nonlocal row
            if pos == k - 1:
                x[pos] = remaining
                out[row] = x
                row += 1
                return
            for v in range(remaining + 1):
                x[pos] = v
                rec(pos + 1, remaining - v)

        if k == 1:
            out[0, 0] = n
        else:
            rec(0, n)
        return out

    def _count(self, remaining, parts):
        # number of compositions of `remaining` into `parts` parts
        return self._binom[remaining + parts - 1, parts - 1]

    def rank(self, x) -> int:
        x = np.asarray(x, dtype=np.int64)
        self._check(x)
        return int(self.rank_many(x[None, :])[0])

    def rank_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised rank of an (m, k) array of valid configurations."""
        xs = np.asarray(xs, dtype=np.int64)
        k = self.k
        ranks = np.zeros(xs.shape[0], dtype=np.int64)
        remaining = np.full(xs.shape[0], self.n, dtype=np.int64)
        for p in range(k - 1):
            parts = k - p  # parts left including position p
            # sum_{v < x_p} C(remaining - v + parts - 2, parts - 2)
            ranks += self._binom[remaining + parts - 1, parts - 1]
            remaining = remaining - xs[:, p]
            ranks -= self._binom[remaining + parts - 1, parts - 1]
        return ranks

    def unrank(self, r: int) -> tuple[int, ...]:
        if not 0 <= r < self.size:
            raise IndexError(f"rank {r} out of range [0, {self.size})")
        k = self.k
        x = []
        remaining = self.n
        for p in range(k - 1):
            parts_after = k - p - 1
            v = 0
            while True:
                block = int(self._count(remaining - v, parts_after))
                if r < block:
                    break
                r -= block
                v += 1
            x.append(v)
            remaining -= v
        x.append(remaining)
        return tuple(x)

    def index_map(self) -> dict[tuple[int, ...], int]:
        """Hash-map view of the ranking (used as an independent cross-check)."""
        return {tuple(int(v) for v in s): i for i, s in enumerate(self.states)}

    def _check(self, x: np.ndarray):
        if x.shape != (self.k,) or np.any(x < 0) or int(x.sum()) != self.n:
            raise ValueError(f"{tuple(x)} is not a configuration of {self.n} particles on {self.k} vertices")

    def __len__(self):
        return self.size

    def __iter__(self):
        for s in self.states:
            yield tuple(int(v) for v in s)

    def __repr__(self):
        return f"StateSpace(k={self.k}, n={self.n}, size={self.size})"


def enumerate_states(k: int, n: int, cap: int = DEFAULT_CAP) -> StateSpace:
    return StateSpace(k, n, cap)


def validate_configuration(x, g: Graph, n: int | None = None) -> tuple[int, ...]:
    x = tuple(int(v) for v in x)
    if len(x) != g.k or any(v < 0 for v in x):
        raise ValueError(f"invalid configuration {x} for graph with k={g.k}")
    if n is not None and sum(x) != n:
        raise ValueError(f"configuration {x} does not hold n={n} particles")
    return x


def one_step_neighbors(x, g: Graph) -> list[tuple[tuple[int, ...], tuple[int, int]]]:
    """Configurations reachable by one particle move along an edge, plus ``x`` itself.

    ``x`` is listed once, tagged with the stay move ``(i, i)`` of its first
    occupied vertex.
    """
    x = validate_configuration(x, g)
    out = []
    stay = next(i for i, v in enumerate(x) if v > 0)
    out.append((x, (stay, stay)))
    for i in range(g.k):
        if x[i] == 0:
            continue
        for j in g.adjacency[i]:
            y = list(x)
            y[i] -= 1
            y[j] += 1
            out.append((tuple(y), (i, j)))
    return out
