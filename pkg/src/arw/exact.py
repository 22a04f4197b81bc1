"""Exact analysis on an enumerated state space.

Transition matrices, stationary laws, worst-case total variation and mixing
times, exhaustive Cheeger constants, and reversibility diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, logsumexp

from . import kernels
from .dynamics import NEG_INF, ArwKernel, step_distribution
from .graph import Graph
from .states import StateSpace, validate_configuration

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
REVERSIBILITY_TOL = 1e-6
DIRECT_SOLVE_MAX = 2000
DENSE_CAP = 5000
SQUARING_MAX = 1500
CHEEGER_CAP = 24


class ConvergenceError(RuntimeError):
    pass


class CapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class TransitionMatrix:
    space: StateSpace
    P: sp.csr_matrix
    kernel: ArwKernel | None = None

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def dense(self) -> np.ndarray:
        return self.P.toarray()

    def lazy(self) -> "TransitionMatrix":
        half = 0.5 * (self.P + sp.identity(self.size, format="csr"))
        kernel = self.kernel.as_lazy() if self.kernel is not None else None
        return TransitionMatrix(self.space, half.tocsr(), kernel)

    def row(self, x) -> np.ndarray:
        return self.P.getrow(self.space.rank(x)).toarray().ravel()


def build_matrix(kernel: ArwKernel, space: StateSpace) -> TransitionMatrix:
    """Sparse transition matrix of ``kernel`` over ``space`` (vectorised over states)."""
    if space.k != kernel.k or space.n != kernel.n:
        raise ValueError(
            f"state space (k={space.k}, n={space.n}) does not match kernel (k={kernel.k}, n={kernel.n})"
        )
    g, n = kernel.graph, kernel.n
    S = space.states
    m = space.size
    rows, cols, vals = [], [], []
    diag = np.zeros(m)
    for i in range(g.k):
        occ = np.flatnonzero(S[:, i] > 0)
        if occ.size == 0:
            continue
        nbrs = np.asarray(g.adjacency[i], dtype=np.int64)
        counts = np.column_stack([S[occ, i] - 1, S[occ][:, nbrs]]).astype(np.float64)
        probs = _row_softmax(counts, kernel.beta, n)
        pick = S[occ, i] / n
        diag[occ] += pick * probs[:, 0]
        for a, j in enumerate(nbrs, start=1):
            dest = S[occ].copy()
            dest[:, i] -= 1
            dest[:, j] += 1
            rows.append(occ)
            cols.append(space.rank_many(dest))
            vals.append(pick * probs[:, a])
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    P = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    ).tocsr()
    P.sum_duplicates()
    if kernel.lazy:
        P = (0.5 * (P + sp.identity(m, format="csr"))).tocsr()
    return TransitionMatrix(space, P, kernel)


def _row_softmax(counts: np.ndarray, beta: float, n: int) -> np.ndarray:
    if beta == NEG_INF:
        w = (counts == counts.min(axis=1, keepdims=True)).astype(np.float64)
    else:
        logits = (beta / n) * counts
        w = np.exp(logits - logits.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


def matrix_from_dense(P: np.ndarray, space: StateSpace | None = None) -> TransitionMatrix:
    """Wrap an arbitrary stochastic matrix (small test chains, comparison chains)."""
    P = np.asarray(P, dtype=np.float64)
    return TransitionMatrix(space, sp.csr_matrix(P), None)


def row_sum_error(matrix: TransitionMatrix) -> float:
    return float(np.abs(np.asarray(matrix.P.sum(axis=1)).ravel() - 1.0).max())


# ---------------------------------------------------------------------------
# stationary distributions
# ---------------------------------------------------------------------------

def stationary(matrix: TransitionMatrix, method: str = "auto", tol: float = 1e-13,
               max_iter: int = 10**7) -> np.ndarray:
    """Stationary vector of ``matrix``.

    ``method="auto"`` solves the linear system directly for at most 2000
    states and otherwise runs power iteration on the lazy matrix (same fixed
    point, no periodicity). Power iteration stops once the L1 residual of
    one lazy step drops to ``tol``.
    """
    m = matrix.size
    if method == "auto":
        method = "direct" if m <= DIRECT_SOLVE_MAX else "power"
    if method == "direct":
        A = matrix.P.T.toarray() - np.eye(m)
        A[-1, :] = 1.0
        b = np.zeros(m)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
    elif method == "power":
        pi = _power_iteration(matrix.P, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _power_iteration(P: sp.csr_matrix, tol: float, max_iter: int) -> np.ndarray:
    m = P.shape[0]
    PT = P.T.tocsr()
    pi = np.full(m, 1.0 / m)
    for it in range(max_iter):
        nxt = 0.5 * (pi + PT @ pi)
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() <= tol:
            return nxt
        pi = nxt
    raise ConvergenceError(f"power iteration did not reach residual {tol} in {max_iter} steps")


def stationary_residual(matrix: TransitionMatrix, pi: np.ndarray) -> float:
    return float(np.abs(matrix.P.T @ pi - pi).sum())


def complete_graph_stationary(k: int, n: int, beta: float, space: StateSpace | None = None) -> np.ndarray:
    """Closed-form stationary law on the complete graph (Curie-Weiss Potts projection).

    Proportional to multinomial(n; x) * exp(beta / (2n) * sum_i x(i)^2),
    evaluated in log space.
    """
    if k < 2:
        raise ValueError("closed form needs k >= 2")
    if not math.isfinite(beta):
        raise ValueError("closed form needs finite beta")
    space = space or StateSpace(k, n)
    S = space.states.astype(np.float64)
    logw = gammaln(n + 1) - gammaln(S + 1).sum(axis=1) + beta / (2 * n) * (S**2).sum(axis=1)
    return np.exp(logw - logsumexp(logw))


# ---------------------------------------------------------------------------
# total variation and mixing
# ---------------------------------------------------------------------------

def tv_distance(mu, nu) -> float:
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != nu.shape:
        raise ValueError("distributions are not aligned")
    return 0.5 * float(np.abs(mu - nu).sum())


def _worst_tv_rows(D: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.abs(D - pi[None, :]).sum(axis=1).max())


def worst_case_tv(matrix: TransitionMatrix, pi: np.ndarray, t: int) -> float:
    """d(t) = max_x || P^t(x, .) - pi ||_TV, computed exactly."""
    if matrix.size > DENSE_CAP:
        raise CapExceeded(f"|Omega| = {matrix.size} exceeds dense cap {DENSE_CAP}")
    if t < 0:
        raise ValueError("t must be >= 0")
    Pt = np.linalg.matrix_power(matrix.dense(), t)
    return _worst_tv_rows(Pt, pi)


def mixing_time(matrix: TransitionMatrix, pi: np.ndarray, eps: float = 0.25,
                max_t: int = 2**60, dense_cap: int = DENSE_CAP) -> int:
    """Least t with d(t) <= eps.

    Small chains: doubling on P^(2^j) by repeated squaring, then binary
    lifting down from the bracketing power; every probe recomputes d(t)
    from the product matrix. Larger chains (up to ``dense_cap``): rows are
    propagated one sparse step at a time, which also yields the first
    crossing directly.
    """
    m = matrix.size
    if m > dense_cap:
        raise CapExceeded(f"|Omega| = {m} exceeds dense cap {dense_cap}")
    if _worst_tv_rows(np.eye(m), pi) <= eps:
        return 0
    if m <= SQUARING_MAX:
        return _mixing_time_squaring(matrix.dense(), pi, eps, max_t)
    return _mixing_time_stepping(matrix.P, pi, eps, min(max_t, 10**7))


def _mixing_time_squaring(P: np.ndarray, pi: np.ndarray, eps: float, max_t: int) -> int:
    powers = [P]
    if _worst_tv_rows(P, pi) <= eps:
        return 1
    while True:
        if 2 ** len(powers) > max_t:
            raise ConvergenceError(f"mixing time exceeds {max_t}")
        nxt = powers[-1] @ powers[-1]
        powers.append(nxt)
        if _worst_tv_rows(nxt, pi) <= eps:
            break
    # d(2^(J-1)) > eps >= d(2^J); lift the lower end bit by bit
    J = len(powers) - 1
    lo = 2 ** (J - 1)
    A = powers[J - 1]
    for b in range(J - 2, -1, -1):
        B = A @ powers[b]
        if _worst_tv_rows(B, pi) > eps:
            A = B
            lo += 2**b
    return lo + 1


def _mixing_time_stepping(P: sp.csr_matrix, pi: np.ndarray, eps: float, max_t: int) -> int:
    PT = P.T.tocsr()
    D = np.eye(P.shape[0])
    for t in range(1, max_t + 1):
        D = (PT @ D.T).T
        if _worst_tv_rows(D, pi) <= eps:
            return t
    raise ConvergenceError(f"mixing time exceeds {max_t}")


# ---------------------------------------------------------------------------
# Cheeger constant
# ---------------------------------------------------------------------------

def edge_measure(matrix: TransitionMatrix, pi: np.ndarray) -> np.ndarray:
    return pi[:, None] * matrix.dense()


def conductance(Q: np.ndarray, pi: np.ndarray, subset) -> float:
    """Phi(S) = Q(S, S^c) / pi(S)."""
    member = np.zeros(len(pi), dtype=bool)
    member[list(subset)] = True
    return float(Q[np.ix_(member, ~member)].sum() / pi[member].sum())


def cheeger_constant(matrix: TransitionMatrix, pi: np.ndarray, cap: int = CHEEGER_CAP
                     ) -> tuple[float, list[int]]:
    """Exact Phi_* by exhaustive search over all subsets with pi(S) <= 1/2."""
    m = matrix.size
    if m > cap:
        raise CapExceeded(f"|Omega| = {m} exceeds exhaustive Cheeger cap {cap}")
    Q = edge_measure(matrix, pi)
    _, mask = kernels.cheeger_search(Q, pi, 0.5 + 1e-12)
    subset = [a for a in range(m) if (mask >> a) & 1]
    if not subset:
        raise ValueError("no admissible subset (is pi degenerate?)")
    return conductance(Q, pi, subset), subset


@dataclass(frozen=True)
class CheegerBounds:
    phi_star: float
    lower: float  # 1 / (4 Phi_*) <= t_mix(1/4)
    upper: float | None  # t_mix(eps) <= ..., lazy chains only
    pi_min: float
    eps: float


def cheeger_upper_bound(phi: float, pi_min: float, eps: float) -> float:
    return 2.0 * math.log(1.0 / (2.0 * eps * math.sqrt(pi_min))) / -math.log1p(-phi * phi / 2.0)


def cheeger_sandwich(matrix: TransitionMatrix, pi: np.ndarray, eps: float = 0.25,
                     phi: float | None = None, upper: bool = True) -> CheegerBounds:
    """Lower bound 1/(4 Phi_*) and, for chains with P(x,x) >= 1/2, the conductance upper bound."""
    if phi is None:
        phi, _ = cheeger_constant(matrix, pi)
    pi_min = float(pi.min())
    hi = None
    if upper:
        if matrix.P.diagonal().min() < 0.5 - STOCHASTIC_TOL:
            raise ValueError("upper bound requires P(x,x) >= 1/2 for all x; use the lazy kernel")
        hi = cheeger_upper_bound(phi, pi_min, eps)
    return CheegerBounds(phi, 1.0 / (4.0 * phi), hi, pi_min, eps)


def analytic_pi_min_bound(n: int, g: Graph, beta: float) -> float:
    """Crude lower bound (1 / (n (Delta + e^beta)))^(n diam) on the smallest stationary mass."""
    return (1.0 / (n * (g.max_degree + math.exp(beta)))) ** (n * g.diameter)


# ---------------------------------------------------------------------------
# reversibility
# ---------------------------------------------------------------------------

def check_detailed_balance(matrix: TransitionMatrix, pi: np.ndarray) -> float:
    """max |pi(x) P(x,y) - pi(y) P(y,x)|."""
    Q = sp.diags(pi) @ matrix.P
    R = (Q - Q.T).tocoo()
    return float(np.abs(R.data).max()) if R.nnz else 0.0


def _transition_prob(kernel: ArwKernel, a, b) -> float:
    a = validate_configuration(a, kernel.graph, kernel.n)
    b = validate_configuration(b, kernel.graph, kernel.n)
    law = step_distribution(kernel, a)
    if b not in law:
        raise ValueError(f"broken cycle: {b} is not one step from {a}")
    p = law[b]
    if p <= 0.0:
        raise ValueError(f"zero-probability step {a} -> {b}")
    return p


def kolmogorov_cycle_products(kernel: ArwKernel, cycle) -> tuple[float, float]:
    """Forward and reverse transition-probability products around a closed cycle.

    ``cycle`` lists the distinct states x_1..x_l; the return to x_1 is implied.
    Products are accumulated as log sums.
    """
    cycle = [tuple(c) for c in cycle]
    if len(cycle) < 2:
        raise ValueError("cycle needs at least two states")
    l = len(cycle)
    log_fwd = sum(math.log(_transition_prob(kernel, cycle[a], cycle[(a + 1) % l])) for a in range(l))
    log_rev = sum(math.log(_transition_prob(kernel, cycle[(a + 1) % l], cycle[a])) for a in range(l))
    return math.exp(log_fwd), math.exp(log_rev)


def relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b))


def non_complete_triple(g: Graph) -> tuple[int, int, int]:
    """Vertices u ~ v ~ w with u, w not adjacent (exists iff g is not complete)."""
    for v in range(g.k):
        nb = g.adjacency[v]
        for a in nb:
            for b in nb:
                if a < b and b not in g.adjacency[a]:
                    return a, v, b
    raise ValueError("graph is complete")


def reversibility_cycle(g: Graph, n: int, triple: tuple[int, int, int] | None = None
                        ) -> list[tuple[int, ...]]:
    """Four-state cycle that breaks Kolmogorov's criterion on a non-complete graph.

    Start with n-2 particles at u and 2 at v, then move v->u, v->w, u->v, w->v.
    """
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    u, v, w = triple or non_complete_triple(g)

    def moved(x, src, dst):
        y = list(x)
        y[src] -= 1
        y[dst] += 1
        return tuple(y)

    x0 = [0] * g.k
    x0[u], x0[v] = n - 2, 2
    x0 = tuple(x0)
    x1 = moved(x0, v, u)
    x2 = moved(x1, v, w)
    x3 = moved(x2, u, v)
    assert moved(x3, w, v) == x0
    return [x0, x1, x2, x3]


# ---------------------------------------------------------------------------
# heaviest-vertex mass
# ---------------------------------------------------------------------------

def heaviest_vertex_masses(space: StateSpace, pi: np.ndarray) -> np.ndarray:
    """pi(S_v) for S_v = {x : x(v) = max_w x(w)}, one entry per vertex."""
    S = space.states
    is_max = S == S.max(axis=1, keepdims=True)
    return is_max.T.astype(np.float64) @ pi
