"""Scripted check batteries behind ``arw suite``.

Each check returns a ``CheckResult``. Hard checks report OK or FAIL; the
figure checks are qualitative and report OK or WARN.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import coupling, exact, zchain
from .dynamics import NEG_INF, ArwKernel, in_absorbing_set, make_rng, simulate
from .graph import complete_graph, cycle_graph, grid_graph, path_graph, star_graph
from .states import StateSpace

OK, FAIL, WARN = "OK", "FAIL", "WARN"

STATIONARY_GRID = dict(k=(2, 3), n=range(2, 7), beta=(-3.0, -1.0, 0.0, 1.0, 3.0))
CHEEGER_BETAS = (-2.0, 0.0, 1.0, 4.0)
TREND_NS = range(3, 10)
FIGURE_SEEDS = (0, 1, 2)
NEG_INF_SEEDS = tuple(range(10))


def cheeger_graphs():
    """(graph, n) pairs whose state space has at most 24 configurations."""
    out = [(complete_graph(2), n) for n in range(1, 24)]
    for g in (complete_graph(3), path_graph(3)):
        out += [(g, n) for n in range(1, 6)]
    for g in (complete_graph(4), path_graph(4), cycle_graph(4), star_graph(4)):
        out += [(g, n) for n in range(1, 4)]
    for g in (complete_graph(5), path_graph(5), star_graph(5)):
        out += [(g, n) for n in range(1, 3)]
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str = ""

    def line(self) -> str:
        return f"[{self.status}] {self.name}: {self.detail}"


def _status(ok: bool) -> str:
    return OK if ok else FAIL


# ---------------------------------------------------------------------------
# lemma checks
# ---------------------------------------------------------------------------

def check_complete_stationary() -> CheckResult:
    worst = 0.0
    for k in STATIONARY_GRID["k"]:
        for n in STATIONARY_GRID["n"]:
            space = StateSpace(k, n)
            for beta in STATIONARY_GRID["beta"]:
                M = exact.build_matrix(ArwKernel(complete_graph(k), n, beta), space)
                pi = exact.stationary(M, method="power")
                ref = exact.complete_graph_stationary(k, n, beta, space)
                worst = max(worst, float(np.abs(pi - ref).sum()))
    return CheckResult("complete-graph stationary law", _status(worst <= 1e-10), f"max L1 {worst:.2e}")


def check_zchain_closed_forms() -> CheckResult:
    worst = 0.0
    d2 = 0.0
    for D in range(1, 6):
        for p in np.linspace(0.05, 0.45, 5):
            for q in np.linspace(0.5, 0.95, 5):
                params = zchain.ZChainParams.from_pq(D, p, q)
                ref = exact.stationary(exact.matrix_from_dense(zchain.single_particle_matrix(D, p, q)))
                lam = zchain.z_stationary(params)
                worst = max(worst, float(np.abs(lam - ref).max()), abs(zchain.lambda_zero(params) - ref[0]))
                if D == 2:
                    d2 = max(d2, abs(zchain.lambda_zero_d2(p, q) - zchain.lambda_zero(params)))
    ok = worst <= 1e-12 and d2 <= 1e-12
    return CheckResult("comparison-chain closed forms", _status(ok), f"max err {worst:.2e}, D=2 gap {d2:.2e}")


def check_meeting_time() -> CheckResult:
    tri, lp = -math.inf, -math.inf
    for g in (path_graph(4), complete_graph(3), grid_graph(2, 3)):
        m = coupling.meeting_time_metric(g)
        d = m.d
        # d(a,b) - d(a,e) - d(e,b) over all triples (a, b, e)
        tri = max(tri, float((d[:, :, None] - d[:, None, :] - d.T[None, :, :]).max()))
        for a in range(g.k):
            for b in range(g.k):
                if a != b:
                    lp = max(lp, coupling.walk_wasserstein(g, m, a, b).value - (d[a, b] - 1.0))
    k2 = coupling.meeting_time_metric(complete_graph(2)).d[0, 1]
    ok = tri <= 1e-9 and lp <= 1e-9 and abs(k2 - 2.0) <= 1e-10
    return CheckResult("meeting-time metric", _status(ok),
                       f"triangle excess {tri:.2e}, W - (d-1) max {lp:.2e}, K2 d(0,1)={k2:.12f}")


def check_tv_lemmas() -> CheckResult:
    worst = math.inf
    bad = []
    for g in (complete_graph(2), complete_graph(3), path_graph(3)):
        for n in range(1, 7):
            space = StateSpace(g.k, n)
            for beta in (0.1, 0.5, 1.0):
                audit = coupling.tv_lemma_audit(ArwKernel(g, n, beta), space)
                for c in audit.checks:
                    if c.applicable:
                        worst = min(worst, c.margin)
                        if not c.holds:
                            bad.append((g.name, n, beta, c.name))
    cg = coupling.tv_lemma_audit(ArwKernel(complete_graph(3), 30, -1.0), lam=0.1).complete_graph
    ok = not bad and cg.holds and cg.cases > 0
    return CheckResult("TV lemma audit", _status(ok),
                       f"min margin {worst:.3g}; complete-graph margin {cg.margin:.3g} over {cg.cases} cases")


def check_negative_comparison() -> CheckResult:
    bad = 0
    cases = 0
    for beta in (-0.5, -2.0):
        r = coupling.negative_comparison_check(ArwKernel(complete_graph(3), 6, beta))
        bad += len(r.violations)
        cases += r.cases
    return CheckResult("one-step dominance (beta < 0)", _status(bad == 0), f"{cases} inequalities, {bad} violated")


def check_helper_lemma() -> CheckResult:
    worst = math.inf
    for g, n in cheeger_graphs():
        space = StateSpace(g.k, n)
        for beta in CHEEGER_BETAS:
            M = exact.build_matrix(ArwKernel(g, n, beta), space)
            pi = exact.stationary(M)
            worst = min(worst, float(exact.heaviest_vertex_masses(space, pi).max() * g.k))
    return CheckResult("heaviest-vertex mass", _status(worst >= 1.0 - 1e-12), f"min k * max_v pi(S_v) = {worst:.4f}")


# ---------------------------------------------------------------------------
# theorem checks
# ---------------------------------------------------------------------------

def check_reversibility() -> CheckResult:
    worst = 0.0
    for k in STATIONARY_GRID["k"]:
        for n in STATIONARY_GRID["n"]:
            space = StateSpace(k, n)
            for beta in STATIONARY_GRID["beta"]:
                M = exact.build_matrix(ArwKernel(complete_graph(k), n, beta), space)
                worst = max(worst, exact.check_detailed_balance(M, exact.stationary(M)))
    g = path_graph(3)
    kernel = ArwKernel(g, 4, 1.0)
    M = exact.build_matrix(kernel, StateSpace(3, 4))
    res = exact.check_detailed_balance(M, exact.stationary(M))
    fwd, rev = exact.kolmogorov_cycle_products(kernel, exact.reversibility_cycle(g, 4))
    gap = exact.relative_gap(fwd, rev)
    ok = worst <= 1e-12 and res > 1e-6 and gap > 1e-6
    return CheckResult("reversibility dichotomy", _status(ok),
                       f"complete max residual {worst:.2e}; path3 residual {res:.3e}, cycle gap {gap:.3e}")


def check_no_contraction() -> CheckResult:
    r = coupling.no_contraction_check()
    ok = (abs(r.value - 1.0) <= 1e-9 and abs(r.dual_value - r.value) <= 1e-9
          and abs(r.explicit_dual_value - 1.0) <= 1e-9 and r.explicit_dual_feasibility <= 1e-9)
    return CheckResult("no-contraction LP", _status(ok),
                       f"W = {r.value:.12f}, dual = {r.dual_value:.12f}, explicit dual = {r.explicit_dual_value:.12f}")


def cheeger_sandwich_rows():
    rows = []
    for g, n in cheeger_graphs():
        space = StateSpace(g.k, n)
        for beta in CHEEGER_BETAS:
            M = exact.build_matrix(ArwKernel(g, n, beta, lazy=True), space)
            pi = exact.stationary(M)
            b = exact.cheeger_sandwich(M, pi, 0.25)
            t = exact.mixing_time(M, pi, 0.25)
            rows.append((g.name, n, beta, len(space), b.phi_star, b.lower, t, b.upper))
    return rows


def check_cheeger_sandwich() -> CheckResult:
    rows = cheeger_sandwich_rows()
    bad = [r for r in rows if not (r[5] <= r[6] <= r[7])]
    return CheckResult("Cheeger sandwich", _status(not bad), f"{len(rows)} lazy instances, {len(bad)} violations")


def trend_values(beta: float) -> list[int]:
    g = complete_graph(3)
    out = []
    for n in TREND_NS:
        M = exact.build_matrix(ArwKernel(g, n, beta), StateSpace(3, n))
        out.append(exact.mixing_time(M, exact.stationary(M), 0.25))
    return out


def subquadratic(ns, ts) -> tuple[bool, float]:
    """Every successive ratio below (n/(n-1))^2 and least-squares log-log slope below 2."""
    ns = list(ns)
    ratios_ok = all(ts[a] / ts[a - 1] < (ns[a] / ns[a - 1]) ** 2 for a in range(1, len(ts)))
    slope = float(np.polyfit(np.log(ns), np.log(ts), 1)[0])
    return ratios_ok and slope < 2.0, slope


def check_trend() -> list[CheckResult]:
    small = trend_values(0.1)
    ok_small, slope = subquadratic(TREND_NS, small)
    big = trend_values(12.0)
    ratios = [big[a] / big[a - 1] for a in range(1, len(big))]
    increasing = all(ratios[a] > ratios[a - 1] for a in range(1, len(ratios)))
    return [
        CheckResult("trend beta=0.1 sub-quadratic", _status(ok_small), f"t_mix {small}, slope {slope:.3f}"),
        CheckResult("trend beta=12 increasing ratios", _status(increasing),
                    "ratios " + ", ".join(f"{r:.3f}" for r in ratios)),
    ]


def neg_inf_run(seed: int, g=None, n: int = 20, steps: int = 10**6) -> dict:
    g = g or grid_graph(3, 3)
    rng = make_rng(seed)
    x0 = np.bincount(rng.integers(0, g.k, n), minlength=g.k)
    tr = simulate(ArwKernel(g, n, NEG_INF), x0, steps, rng, stride=1, dtype=np.int16)
    mx = tr.states.max(axis=1)
    mn = tr.states.min(axis=1)
    inside = in_absorbing_set(tr.states, n)
    entry = int(np.argmax(inside)) if inside.any() else None
    return dict(
        max_monotone=bool(np.all(np.diff(mx) <= 0)),
        min_monotone=bool(np.all(np.diff(mn) >= 0)),
        entry=entry,
        stays=bool(entry is not None and inside[entry:].all()),
    )


def check_neg_inf(threads: int = 1) -> CheckResult:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        runs = list(pool.map(neg_inf_run, NEG_INF_SEEDS))
    ok = all(r["max_monotone"] and r["min_monotone"] and r["stays"] for r in runs)
    entries = [r["entry"] for r in runs]
    return CheckResult("beta=-inf monotonicity and absorption", _status(ok), f"entry times {entries}")


# ---------------------------------------------------------------------------
# figure reproductions (soft)
# ---------------------------------------------------------------------------

def write_trajectory_csv(path: str, tr, header: dict) -> None:
    k = tr.states.shape[1]
    with open(path, "w") as fh:
        for key in sorted(header):
            fh.write(f"# {key}: {header[key]}\n")
        fh.write("t," + ",".join(f"x{v}" for v in range(k)) + "\n")
        for t, row in zip(tr.times, tr.states):
            fh.write(f"{int(t)}," + ",".join(str(int(v)) for v in row) + "\n")


def _figure_run(args):
    beta, seed, steps, stride, outdir = args
    g = grid_graph(8, 8)
    n = 320
    rng = make_rng(seed)
    x0 = np.bincount(rng.integers(0, g.k, n), minlength=g.k)
    tr = simulate(ArwKernel(g, n, beta), x0, steps, rng, stride=stride)
    if outdir:
        tag = "neginf" if beta == NEG_INF else f"{beta:g}".replace("-", "m")
        write_trajectory_csv(os.path.join(outdir, f"grid8x8_beta{tag}_seed{seed}.csv"), tr,
                             {"seed": seed, "graph": "grid:8x8", "beta": beta, "n": n, "steps": steps,
                              "stride": stride, "init": "uniform random placement"})
    return beta, seed, tr.states[-1]


def check_figures(outdir: str | None = None, threads: int = 1) -> list[CheckResult]:
    if outdir:
        os.makedirs(outdir, exist_ok=True)
    jobs = [(b, s, 10**5, 1000, outdir) for b in (0.0, 300.0, 500.0) for s in FIGURE_SEEDS]
    jobs += [(-500.0, s, 10**6, 10**4, outdir) for s in FIGURE_SEEDS]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        finals = list(pool.map(_figure_run, jobs))
    n, k = 320, 64
    out = []
    for beta, seed, x in finals:
        top4 = float(np.sort(x)[::-1][:4].sum()) / n
        if beta == 500.0:
            st = OK if top4 >= 0.5 else WARN
            out.append(CheckResult(f"grid8x8 concentration beta=500 seed={seed}", st, f"top-4 share {top4:.3f} (soft >= 0.5)"))
        elif beta == -500.0:
            cap = math.ceil(n / k) + 2
            st = OK if x.max() <= cap else WARN
            out.append(CheckResult(f"grid8x8 spread beta=-500 seed={seed}", st, f"max occupancy {int(x.max())} (soft <= {cap})"))
        else:
            out.append(CheckResult(f"grid8x8 beta={beta:g} seed={seed}", OK,
                                   f"top-4 share {top4:.3f}, occupied {int((x > 0).sum())}/{k} (reported)"))
    return out


# ---------------------------------------------------------------------------

SUITES = ("figures", "theorems", "lemmas")


def run_suite(name: str, outdir: str | None = None, threads: int = 1) -> list[CheckResult]:
    if name == "lemmas":
        checks = [check_complete_stationary, check_zchain_closed_forms, check_meeting_time,
                  check_tv_lemmas, check_negative_comparison, check_helper_lemma]
        return [c() for c in checks]
    if name == "theorems":
        out = [check_reversibility(), check_no_contraction(), check_cheeger_sandwich()]
        out += check_trend()
        out.append(check_neg_inf(threads))
        return out
    if name == "figures":
        return check_figures(outdir, threads)
    raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
