"""Transport distances between one-step laws and checks of the coupling lemmas.

Single-walk meeting-time metric, configuration metric, exact Wasserstein
distances through ``transport.solve_transport``, path-coupling contraction
sweeps, and exhaustive audits of the total-variation bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import ArwKernel, move_weights, step_distribution
from .exact import tv_distance
from .graph import Graph
from .states import StateSpace
from .transport import TransportPlan, check_dual, solve_transport

METRICS = ("unit", "meeting-time")
POLICIES = ("all-pairs", "adjacent-only")
AUDIT_TOL = 1e-12


# ---------------------------------------------------------------------------
# single-walk metric
# ---------------------------------------------------------------------------

def uniform_walk_matrix(g: Graph) -> np.ndarray:
    """Q(i, .) uniform over N(i) and i itself."""
    Q = np.zeros((g.k, g.k))
    for i, nb in enumerate(g.adjacency):
        Q[i, [i, *nb]] = 1.0 / (len(nb) + 1)
    return Q


@dataclass(frozen=True)
class MeetingTimeMetric:
    d: np.ndarray
    residual: float

    @property
    def d_max(self) -> float:
        return float(self.d.max())

    def d_max_adjacent(self, g: Graph) -> float:
        return max(float(self.d[i, j]) for i, j in g.edges)

    def __call__(self, i: int, j: int) -> float:
        return float(self.d[i, j])


def meeting_time_metric(g: Graph, tol: float = 1e-10) -> MeetingTimeMetric:
    """Expected meeting times of two independent Q-walks.

    Solves d(x,y) = 1 + sum_{a != b} Q(x,a) Q(y,b) d(a,b) over unordered pairs
    x < y, with d(x,x) = 0.
    """
    k = g.k
    Q = uniform_walk_matrix(g)
    if k == 1:
        return MeetingTimeMetric(np.zeros((1, 1)), 0.0)
    pairs = [(x, y) for x in range(k) for y in range(x + 1, k)]
    index = {p: a for a, p in enumerate(pairs)}
    m = len(pairs)
    A = np.eye(m)
    for r, (x, y) in enumerate(pairs):
        joint = np.outer(Q[x], Q[y])
        for a in range(k):
            for b in range(k):
                if a != b and joint[a, b] > 0.0:
                    A[r, index[(min(a, b), max(a, b))]] -= joint[a, b]
    rhs = np.ones(m)
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - connected graphs are fine
        raise ValueError("meeting-time system is singular") from exc
    residual = float(np.abs(A @ sol - rhs).max())
    if residual > tol:
        raise ValueError(f"meeting-time solve residual {residual:.3g} exceeds {tol}")
    d = np.zeros((k, k))
    for (x, y), val in zip(pairs, sol):
        d[x, y] = d[y, x] = val
    return MeetingTimeMetric(d, residual)


def walk_wasserstein(g: Graph, metric: MeetingTimeMetric, x: int, y: int) -> TransportPlan:
    """W_d^Q(x, y) between the one-step laws of the uniform walk from x and from y."""
    Q = uniform_walk_matrix(g)
    sx, sy = np.flatnonzero(Q[x]), np.flatnonzero(Q[y])
    return solve_transport(Q[x, sx], Q[y, sy], metric.d[np.ix_(sx, sy)], tuple(sx), tuple(sy))


# ---------------------------------------------------------------------------
# configuration metric
# ---------------------------------------------------------------------------

class ConfigurationMetric:
    """Path metric rho on configurations.

    ``unit``: unit length on moves along graph edges, so the ground cost is
    the graph distance. ``meeting-time``: moves between any two vertices i, j
    with length d(i, j). In both cases the ground cost is a metric, and rho
    between arbitrary configurations is the earth mover's distance between the
    occupancy vectors. For single-move pairs that is the ground cost itself.
    """

    def __init__(self, g: Graph, kind: str = "unit"):
        if kind not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        self.graph = g
        self.kind = kind
        if kind == "unit":
            self.ground = g.distances.astype(np.float64)
        else:
            self.ground = meeting_time_metric(g).d
        self._cache: dict[tuple, float] = {}

    def single_move(self, i: int, j: int) -> float:
        return float(self.ground[i, j])

    def __call__(self, x, y) -> float:
        x = tuple(int(v) for v in x)
        y = tuple(int(v) for v in y)
        if len(x) != self.graph.k or len(y) != self.graph.k:
            raise ValueError("configuration length does not match graph")
        if sum(x) != sum(y):
            raise ValueError("configurations hold different particle counts")
        if x == y:
            return 0.0
        key = (x, y) if x < y else (y, x)
        if key in self._cache:
            return self._cache[key]
        diff = np.asarray(x) - np.asarray(y)
        src = np.flatnonzero(diff > 0)
        dst = np.flatnonzero(diff < 0)
        if src.size == 1 and dst.size == 1 and diff[src[0]] == 1:
            val = self.single_move(int(src[0]), int(dst[0]))
        else:
            plan = solve_transport(diff[src].astype(float), (-diff[dst]).astype(float),
                                   self.ground[np.ix_(src, dst)])
            val = plan.value
        self._cache[key] = val
        return val

    def cost_matrix(self, xs, ys) -> np.ndarray:
        return np.array([[self(a, b) for b in ys] for a in xs])


def configuration_metric(g: Graph, kind: str = "unit") -> ConfigurationMetric:
    return ConfigurationMetric(g, kind)


# ---------------------------------------------------------------------------
# Wasserstein between one-step laws
# ---------------------------------------------------------------------------

def wasserstein_lp(mu: dict, nu: dict, cost) -> TransportPlan:
    """Optimal transport between two finite distributions keyed by configuration.

    ``cost`` is a callable on pairs of keys (for example a ``ConfigurationMetric``).
    """
    rows = sorted(k for k, p in mu.items() if p > 0)
    cols = sorted(k for k, p in nu.items() if p > 0)
    C = np.array([[cost(a, b) for b in cols] for a in rows], dtype=np.float64)
    return solve_transport([mu[a] for a in rows], [nu[b] for b in cols], C, rows, cols)


def step_wasserstein(kernel: ArwKernel, x, y, rho: ConfigurationMetric) -> TransportPlan:
    return wasserstein_lp(step_distribution(kernel, x), step_distribution(kernel, y), rho)


def explicit_no_contraction_dual(x) -> tuple[dict, dict]:
    """Hand-built dual solution for the 4-path pair y = x - e_1 + e_2 at beta = 0.

    Vertices are 0..3 along the path; ``x`` must have a particle on every
    vertex and at least two on vertex 1. Keys are configurations.
    """
    x = tuple(int(v) for v in x)
    if len(x) != 4 or min(x) < 1 or x[1] < 2:
        raise ValueError("need x(v) >= 1 everywhere and x(1) >= 2")

    def mv(z, a, b):
        z = list(z)
        z[a] -= 1
        z[b] += 1
        return tuple(z)

    y = mv(x, 1, 2)
    u = {x: 1.0, mv(x, 0, 1): 0.0, mv(x, 1, 0): 2.0, mv(x, 1, 2): 0.0,
         mv(x, 2, 1): 2.0, mv(x, 2, 3): 0.0, mv(x, 3, 2): 0.0}
    v = {y: 0.0, mv(y, 0, 1): 1.0, mv(y, 1, 0): -1.0, mv(y, 1, 2): 1.0,
         mv(y, 2, 1): -1.0, mv(y, 2, 3): 1.0, mv(y, 3, 2): 1.0}
    return u, v


@dataclass(frozen=True)
class NoContractionResult:
    x: tuple
    y: tuple
    value: float
    dual_value: float
    rho_xy: float
    explicit_dual_value: float
    explicit_dual_feasibility: float

    @property
    def ratio(self) -> float:
        return self.value / self.rho_xy


def no_contraction_check(x=(1, 2, 1, 1)) -> NoContractionResult:
    """Exact W(x, y) on the 4-path at beta = 0 with the unit metric, y = x - e_1 + e_2."""
    from .graph import path_graph

    g = path_graph(4)
    n = sum(x)
    kernel = ArwKernel(g, n, 0.0)
    rho = ConfigurationMetric(g, "unit")
    x = tuple(x)
    y = (x[0], x[1] - 1, x[2] + 1, x[3])
    plan = step_wasserstein(kernel, x, y, rho)
    u, v = explicit_no_contraction_dual(x)
    mu = step_distribution(kernel, x)
    nu = step_distribution(kernel, y)
    rows, cols = list(plan.rows), list(plan.cols)
    C = np.array([[rho(a, b) for b in cols] for a in rows])
    ua = np.array([u[a] for a in rows])
    vb = np.array([v[b] for b in cols])
    chk = check_dual([mu[a] for a in rows], [nu[b] for b in cols], C, ua, vb)
    explicit = float(sum(mu[a] * u[a] for a in rows) + sum(nu[b] * v[b] for b in cols))
    return NoContractionResult(x, y, plan.value, plan.dual_value, rho(x, y), explicit, chk.feasibility)


# ---------------------------------------------------------------------------
# contraction sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeRatio:
    x: tuple
    y: tuple
    move: tuple
    wasserstein: float
    rho: float

    @property
    def ratio(self) -> float:
        return self.wasserstein / self.rho


@dataclass(frozen=True)
class ContractionReport:
    edges: list = field(repr=False)
    max_ratio: float
    worst: EdgeRatio | None

    @property
    def delta(self) -> float:
        return 1.0 - self.max_ratio


def h_edges(space: StateSpace, g: Graph, policy: str = "all-pairs"):
    """Unordered configuration pairs (x, y = x - e_i + e_j), each listed once."""
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    seen = set()
    for x in space:
        for i in range(g.k):
            if x[i] == 0:
                continue
            targets = g.adjacency[i] if policy == "adjacent-only" else [j for j in range(g.k) if j != i]
            for j in targets:
                y = list(x)
                y[i] -= 1
                y[j] += 1
                y = tuple(y)
                key = (x, y) if x < y else (y, x)
                if key not in seen:
                    seen.add(key)
                    yield x, y, (i, j)


def contraction_report(kernel: ArwKernel, metric: str = "meeting-time", space: StateSpace | None = None,
                       policy: str = "all-pairs", rho: ConfigurationMetric | None = None) -> ContractionReport:
    """W_rho^P(x, y) / rho(x, y) over every H-edge of an enumerable state space."""
    g = kernel.graph
    space = space or StateSpace(g.k, kernel.n)
    rho = rho or ConfigurationMetric(g, metric)
    laws: dict = {}

    def law(z):
        if z not in laws:
            laws[z] = step_distribution(kernel, z)
        return laws[z]

    edges = []
    for x, y, move in h_edges(space, g, policy):
        plan = wasserstein_lp(law(x), law(y), rho)
        edges.append(EdgeRatio(x, y, move, plan.value, rho(x, y)))
    worst = max(edges, key=lambda e: e.ratio, default=None)
    return ContractionReport(edges, worst.ratio if worst else 0.0, worst)


@dataclass(frozen=True)
class ThresholdScan:
    beta: float
    bracket: tuple[float, float]
    grid: list  # (beta, max ratio) pairs probed, in probe order


def contraction_threshold(g: Graph, n: int, metric: str = "meeting-time", policy: str = "all-pairs",
                          beta_hi: float = 1.0, tol: float = 1e-4, beta_max: float = 1e3) -> ThresholdScan:
    """Bisection for the beta > 0 where the maximal W/rho ratio first reaches 1.

    Assumes the ratio is below 1 at beta = 0 and crosses once; probed values
    are returned so monotonicity can be inspected rather than assumed.
    """
    space = StateSpace(g.k, n)
    rho = ConfigurationMetric(g, metric)
    grid = []

    def ratio(beta):
        r = contraction_report(ArwKernel(g, n, beta), metric, space, policy, rho).max_ratio
        grid.append((beta, r))
        return r

    if ratio(0.0) >= 1.0:
        raise ValueError("no contraction at beta = 0")
    lo, hi = 0.0, beta_hi
    while ratio(hi) < 1.0:
        lo, hi = hi, 2 * hi
        if hi > beta_max:
            raise ValueError(f"ratio stays below 1 up to beta = {beta_max}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ratio(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return ThresholdScan(0.5 * (lo + hi), (lo, hi), grid)


def maximal_coupling(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Joint law on a common support that agrees with probability 1 - TV(p, q)."""
    common = np.minimum(p, q)
    tv = 1.0 - common.sum()
    joint = np.diag(common)
    if tv > 0:
        joint += np.outer(p - common, q - common) / tv
    return joint


def synchronous_coupling_cost(kernel: ArwKernel, x, i: int, j: int, rho: ConfigurationMetric) -> float:
    """Expected rho after one step of the particle-pairing coupling for y = x - e_i + e_j.

    The extra particle (at i in x, at j in y) is paired across the chains and
    moves independently; all other particles are paired by location and move
    under the maximal coupling of P_x(v, .) and P_y(v, .).
    """
    g, n, beta = kernel.graph, kernel.n, kernel.beta
    x = tuple(x)
    y = list(x)
    y[i] -= 1
    y[j] += 1
    y = tuple(y)

    def moved(z, a, b):
        z = list(z)
        z[a] -= 1
        z[b] += 1
        return tuple(z)

    total = 0.0
    # extra particle
    sx, px = move_weights(x, i, g, n, beta)
    sy, py = move_weights(y, j, g, n, beta)
    for a, pa in zip(sx, px):
        for b, pb in zip(sy, py):
            total += (1.0 / n) * pa * pb * rho(moved(x, i, a), moved(y, j, b))
    # location-paired particles: x(v) - [v == i] of them at each v
    for v in range(g.k):
        c = x[v] - (1 if v == i else 0)
        if c == 0:
            continue
        s1, p1 = move_weights(x, v, g, n, beta)
        s2, p2 = move_weights(y, v, g, n, beta)
        assert np.array_equal(s1, s2)
        joint = maximal_coupling(p1, p2)
        for a in range(len(s1)):
            for b in range(len(s2)):
                if joint[a, b] > 0:
                    total += (c / n) * joint[a, b] * rho(moved(x, v, s1[a]), moved(y, v, s2[b]))
    if kernel.lazy:
        total = 0.5 * rho(x, y) + 0.5 * total
    return total


# ---------------------------------------------------------------------------
# total-variation lemma audit
# ---------------------------------------------------------------------------

def close_distributions_bound(beta: float) -> float:
    """(e^{beta/2} - 1) / (e^{beta/2} + 1) = tanh(beta / 4)."""
    return math.tanh(beta / 4.0)


def extreme_point_bound(beta: float, d: int) -> float:
    """e^beta / (d + e^beta) - 1 / (d + 1): farthest point of the ratio-constrained simplex from uniform."""
    return 1.0 / (1.0 + d * math.exp(-beta)) - 1.0 / (d + 1)


def same_vertex_bound(beta: float, Delta: int, n: int) -> float:
    return (Delta + 1) * beta / n


def complete_graph_tv_bound(beta: float, n: int, k: int, lam: float) -> float:
    return (-5.0 * beta / n) / (2.0 + (k - 2) * math.exp(2.0 * lam * beta))


def complete_graph_proviso(beta: float, n: int) -> bool:
    """n >= -3 beta / log(5/4)."""
    return n >= -3.0 * beta / math.log(1.25)


def lambda_beta(beta: float, delta: float = 0.5) -> float:
    """log(1 - delta) / (4 beta), positive for beta < 0."""
    if beta >= 0:
        raise ValueError("lambda_beta needs beta < 0")
    return math.log(1.0 - delta) / (4.0 * beta)


def beta_bound_predicate(beta: float, k: int, lam: float) -> bool:
    """-10 beta < 2 + (k - 2) e^{4 lambda beta}."""
    return -10.0 * beta < 2.0 + (k - 2) * math.exp(4.0 * lam * beta)


def in_band(x, n: int, lam: float) -> bool:
    """x in C(lambda): |x(v) - n/k| <= lambda n for every v."""
    k = len(x)
    return all(abs(v - n / k) <= lam * n + 1e-12 for v in x)


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    applicable: bool
    lhs: float = 0.0  # worst left-hand side found
    bound: float = 0.0
    cases: int = 0
    witness: tuple = ()
    note: str = ""

    @property
    def margin(self) -> float:
        return self.bound - self.lhs

    @property
    def holds(self) -> bool:
        return (not self.applicable) or self.lhs <= self.bound + AUDIT_TOL


@dataclass(frozen=True)
class TvAudit:
    close: LemmaCheck
    extreme: LemmaCheck
    same_vertex: LemmaCheck
    complete_graph: LemmaCheck

    @property
    def checks(self) -> list[LemmaCheck]:
        return [self.close, self.extreme, self.same_vertex, self.complete_graph]

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.checks)


def _neighbor_pairs(space: StateSpace, k: int):
    for x in space:
        for i in range(k):
            if x[i] == 0:
                continue
            for j in range(k):
                if j == i:
                    continue
                y = list(x)
                y[i] -= 1
                y[j] += 1
                yield x, tuple(y), (i, j)


def tv_lemma_audit(kernel: ArwKernel, space: StateSpace | None = None, lam: float | None = None
                   ) -> TvAudit:
    """Exhaustive worst cases of the TV-distance lemmas on an enumerable space.

    The same-vertex comparisons range over neighbouring configurations
    y = x - e_i + e_j (any i != j) and vertices v occupied in both, since
    P_z(v, .) is only defined when z(v) >= 1.
    """
    g, n, beta = kernel.graph, kernel.n, kernel.beta
    space = space or StateSpace(g.k, n)
    Q = uniform_walk_matrix(g)

    def law(z, v):
        s, p = move_weights(z, v, g, n, beta)
        out = np.zeros(g.k)
        out[s] = p
        return out

    if beta >= 0 and math.isfinite(beta):
        worst, wit, worst_ext, ext_bound, wit_ext, cases = 0.0, (), -math.inf, 0.0, (), 0
        for x in space:
            for i in range(g.k):
                if x[i] == 0:
                    continue
                tv = tv_distance(law(x, i), Q[i])
                cases += 1
                if tv > worst:
                    worst, wit = tv, (x, i)
                eb = extreme_point_bound(beta, len(g.adjacency[i]))
                if tv - eb > worst_ext - ext_bound or not wit_ext:
                    worst_ext, ext_bound, wit_ext = tv, eb, (x, i)
        close = LemmaCheck("close-distributions", True, worst, close_distributions_bound(beta), cases, wit)
        extreme = LemmaCheck("extreme-point", True, worst_ext, ext_bound, cases, wit_ext,
                             "per-degree bound at the worst-margin case")
        worst, wit, cases = 0.0, (), 0
        for x, y, _ in _neighbor_pairs(space, g.k):
            for v in range(g.k):
                if x[v] == 0 or y[v] == 0:
                    continue
                tv = tv_distance(law(x, v), law(y, v))
                cases += 1
                if tv > worst:
                    worst, wit = tv, (x, y, v)
        same = LemmaCheck("same-vertex", True, worst, same_vertex_bound(beta, g.max_degree, n), cases, wit)
    else:
        close = LemmaCheck("close-distributions", False, note="needs beta >= 0")
        extreme = LemmaCheck("extreme-point", False, note="needs beta >= 0")
        same = LemmaCheck("same-vertex", False, note="needs beta >= 0")

    if beta < 0 and math.isfinite(beta) and g.is_complete() and g.k >= 2:
        lam = lambda_beta(beta) if lam is None else lam
        note = "" if complete_graph_proviso(beta, n) else "proviso n >= -3 beta / log(5/4) violated"
        worst, wit, cases = 0.0, (), 0
        for x, y, _ in _neighbor_pairs(space, g.k):
            if not (in_band(x, n, lam) and in_band(y, n, lam)):
                continue
            for v in range(g.k):
                if x[v] == 0 or y[v] == 0:
                    continue
                tv = tv_distance(law(x, v), law(y, v))
                cases += 1
                if tv > worst:
                    worst, wit = tv, (x, y, v)
        cg = LemmaCheck("complete-graph", True, worst, complete_graph_tv_bound(beta, n, g.k, lam), cases,
                        wit, note)
    else:
        cg = LemmaCheck("complete-graph", False, note="needs beta < 0 on a complete graph")
    return TvAudit(close, extreme, same, cg)


def convex_ratio_max(kernel: ArwKernel, space: StateSpace | None = None) -> float:
    """Largest ratio P_x(i, a) / P_x(i, b) over the enumerated space."""
    g, n = kernel.graph, kernel.n
    space = space or StateSpace(g.k, n)
    worst = 1.0
    for x in space:
        for i in range(g.k):
            if x[i]:
                _, p = move_weights(x, i, g, n, kernel.beta)
                worst = max(worst, float(p.max() / p.min()))
    return worst


# ---------------------------------------------------------------------------
# one-step comparison with independent walks (beta < 0)
# ---------------------------------------------------------------------------

def gain_loss(kernel: ArwKernel, x, v: int) -> tuple[float, float]:
    """P(x(v) increases by one), P(x(v) decreases by one) after one step."""
    g, n = kernel.graph, kernel.n
    gain = 0.0
    for i in g.adjacency[v]:
        if x[i]:
            s, p = move_weights(x, i, g, n, kernel.beta)
            gain += x[i] / n * float(p[list(s).index(v)])
    loss = 0.0
    if x[v]:
        _, p = move_weights(x, v, g, n, kernel.beta)
        loss = x[v] / n * (1.0 - float(p[0]))
    if kernel.lazy:
        gain, loss = 0.5 * gain, 0.5 * loss
    return gain, loss


@dataclass(frozen=True)
class DominanceCheck:
    cases: int
    violations: list  # (x, v, condition label, lhs, rhs)
    worst_margin: float

    @property
    def holds(self) -> bool:
        return not self.violations


def negative_comparison_check(kernel: ArwKernel, space: StateSpace | None = None,
                              tol: float = AUDIT_TOL) -> DominanceCheck:
    """The four one-step inequalities against the beta = 0 chain, for every x and v.

    Away from the mean n/k the repelling chain must be no more likely to move
    |x(v) - n/k| up and no less likely to move it down; at the mean it must be
    no more likely to leave in either direction.
    """
    g, n = kernel.graph, kernel.n
    space = space or StateSpace(g.k, n)
    free = kernel.with_beta(0.0)
    mean = n / g.k
    violations = []
    worst = math.inf
    cases = 0
    for x in space:
        for v in range(g.k):
            gx, lx = gain_loss(kernel, x, v)
            gy, ly = gain_loss(free, x, v)
            if x[v] > mean:
                tests = [("away", gx, gy), ("toward", ly, lx)]
            elif x[v] < mean:
                tests = [("away", lx, ly), ("toward", gy, gx)]
            else:
                tests = [("up at mean", gx, gy), ("down at mean", lx, ly)]
            for label, lhs, rhs in tests:
                # every test reads lhs <= rhs
                cases += 1
                worst = min(worst, rhs - lhs)
                if lhs > rhs + tol:
                    violations.append((x, v, label, lhs, rhs))
    return DominanceCheck(cases, violations, worst)
