"""Transportation problem by successive shortest paths, with a dual certificate.

The bipartite network has one node per source atom and per target atom and an
uncapacitated arc i -> j of cost C[i, j]. Each augmentation follows a
Bellman-Ford shortest path in the residual network (costs can be negative on
reverse arcs, and instances are small). Optimality is certified afterwards,
independently of the solver's bookkeeping: node potentials are recomputed on
the residual network of the final plan and must yield a feasible dual whose
value matches the primal cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-15
CERT_TOL = 1e-9


class MarginalMismatch(ValueError):
    pass


class CertificationError(RuntimeError):
    """The recovered dual does not certify the plan (signals a solver bug)."""


@dataclass(frozen=True)
class TransportPlan:
    plan: np.ndarray  # (m1, m2) joint masses
    cost: np.ndarray
    value: float
    u: np.ndarray  # dual potentials for the source marginal
    v: np.ndarray  # dual potentials for the target marginal
    dual_value: float
    rows: tuple = ()
    cols: tuple = ()

    def support(self, tol: float = 1e-12) -> list[tuple[object, object, float]]:
        out = []
        for a, b in zip(*np.nonzero(self.plan > tol)):
            ra = self.rows[a] if self.rows else int(a)
            cb = self.cols[b] if self.cols else int(b)
            out.append((ra, cb, float(self.plan[a, b])))
        return out


@dataclass(frozen=True)
class DualCheck:
    feasibility: float  # max(u_i + v_j - C_ij, 0)
    slackness: float  # max |C_ij - u_i - v_j| over the plan support
    gap: float  # |dual value - primal value|

    def ok(self, tol: float = CERT_TOL) -> bool:
        return self.feasibility <= tol and self.slackness <= tol and self.gap <= tol


def _bellman_ford(n_nodes, tails, heads, costs, dist):
    """Relax in place; returns (dist, pred_arc, converged)."""
    pred = np.full(n_nodes, -1, dtype=np.int64)
    for _ in range(n_nodes + 1):
        cand = dist[tails] + costs
        better = cand < dist[heads] - 1e-15
        if not better.any():
            return dist, pred, True
        # one improving arc per head (lowest index) keeps predecessor tracking simple
        idx = np.flatnonzero(better)
        order = np.lexsort((cand[idx], heads[idx]))
        idx = idx[order]
        first = np.ones(idx.size, dtype=bool)
        first[1:] = heads[idx][1:] != heads[idx][:-1]
        idx = idx[first]
        dist[heads[idx]] = cand[idx]
        pred[heads[idx]] = idx
    return dist, pred, False


def _residual_arcs(flow: np.ndarray, C: np.ndarray):
    m1, m2 = C.shape
    ii, jj = np.meshgrid(np.arange(m1), np.arange(m2), indexing="ij")
    tails = [ii.ravel()]
    heads = [m1 + jj.ravel()]
    costs = [C.ravel()]
    kind = [np.zeros(m1 * m2, dtype=np.int64)]
    fi, fj = np.nonzero(flow > MASS_TOL)
    tails.append(m1 + fj)
    heads.append(fi)
    costs.append(-C[fi, fj])
    kind.append(np.ones(fi.size, dtype=np.int64))
    return (np.concatenate(tails), np.concatenate(heads), np.concatenate(costs),
            np.concatenate(kind))


def solve_transport(mu, nu, C, rows=(), cols=(), tol: float = 1e-9) -> TransportPlan:
    """Optimal coupling of ``mu`` and ``nu`` under cost matrix ``C``."""
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    m1, m2 = C.shape
    if mu.shape != (m1,) or nu.shape != (m2,):
        raise ValueError("cost matrix does not match marginals")
    if np.any(mu < 0) or np.any(nu < 0):
        raise ValueError("negative mass")
    if abs(mu.sum() - nu.sum()) > tol:
        raise MarginalMismatch(f"total masses differ: {mu.sum()} vs {nu.sum()}")
    supply = mu.copy()
    demand = nu.copy()
    flow = np.zeros((m1, m2))
    V = m1 + m2
    for _ in range(4 * (m1 + m2) * max(m1, m2) + 10):
        if supply.sum() <= MASS_TOL * m1 or not (demand > MASS_TOL).any():
            break
        tails, heads, costs, kind = _residual_arcs(flow, C)
        dist = np.full(V, np.inf)
        dist[:m1][supply > MASS_TOL] = 0.0
        dist, pred, ok = _bellman_ford(V, tails, heads, costs, dist)
        if not ok:
            raise CertificationError("negative cycle during augmentation")
        sinks = np.flatnonzero((demand > MASS_TOL) & np.isfinite(dist[m1:]))
        if sinks.size == 0:
            break
        j = int(sinks[np.argmin(dist[m1 + sinks])])
        # walk back to the source side, collecting arcs
        path = []
        node = m1 + j
        while True:
            a = pred[node]
            if a < 0:
                break
            path.append(int(a))
            node = int(tails[a])
        i0 = node
        amount = min(supply[i0], demand[j])
        for a in path:
            if kind[a] == 1:
                amount = min(amount, flow[heads[a], tails[a] - m1])
        for a in path:
            if kind[a] == 0:
                flow[tails[a], heads[a] - m1] += amount
            else:
                flow[heads[a], tails[a] - m1] -= amount
        supply[i0] -= amount
        demand[j] -= amount
    else:  # pragma: no cover
        raise CertificationError("augmentation limit reached")
    flow[flow < 0] = 0.0
    if max(np.abs(flow.sum(1) - mu).max(), np.abs(flow.sum(0) - nu).max()) > tol:
        raise CertificationError("plan marginals do not match inputs")
    value = float((flow * C).sum())
    u, v = certify_plan(flow, C)
    dual = float(mu @ u + nu @ v)
    check = check_dual(mu, nu, C, u, v, flow, value)
    if not check.ok(tol):
        raise CertificationError(f"dual certificate failed: {check}")
    return TransportPlan(flow, C, value, u, v, dual, tuple(rows), tuple(cols))


def certify_plan(flow: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dual potentials (u, v) from shortest distances in the plan's residual network.

    With pi the distances from a virtual root joined to every node, u = -pi on
    sources and v = pi on targets. A negative cycle means the plan is not
    optimal.
    """
    m1, m2 = C.shape
    tails, heads, costs, _ = _residual_arcs(flow, C)
    dist, _, ok = _bellman_ford(m1 + m2, tails, heads, costs, np.zeros(m1 + m2))
    if not ok:
        raise CertificationError("residual network has a negative cycle: plan not optimal")
    return -dist[:m1], dist[m1:]


def check_dual(mu, nu, C, u, v, plan=None, primal: float | None = None,
               support_tol: float = 1e-12) -> DualCheck:
    """Residuals of a candidate dual (u, v) for max mu.u + nu.v s.t. u_i + v_j <= C_ij."""
    C = np.asarray(C, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    slack = C - u[:, None] - v[None, :]
    feas = float(max(0.0, -slack.min()))
    cs = 0.0
    gap = 0.0
    dual = float(np.asarray(mu) @ u + np.asarray(nu) @ v)
    if plan is not None:
        on = plan > support_tol
        cs = float(np.abs(slack[on]).max()) if on.any() else 0.0
        if primal is None:
            primal = float((plan * C).sum())
    if primal is not None:
        gap = abs(dual - primal)
    return DualCheck(feas, cs, gap)
