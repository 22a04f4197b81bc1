"""Command-line entry point: ``arw {simulate,analyze,zchain,coupling,suite}``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import coupling, exact, suites, zchain
from .config import ExperimentConfig, format_beta, parse_beta
from .dynamics import ArwKernel, even_configuration, make_rng, replica_rngs, simulate
from .graph import GraphError, parse_graph_spec
from .states import StateSpace


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return v
    return obj


def dump_json(payload: dict, path: str | None) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(path: str | None, header: dict, columns: list[str], rows) -> None:
    lines = [f"# {k}: {header[k]}" for k in sorted(header)]
    lines.append(",".join(columns))
    lines += [",".join(str(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _replica_path(path: str | None, r: int, count: int) -> str | None:
    if path is None or count == 1:
        return path
    stem, ext = os.path.splitext(path)
    return f"{stem}_r{r}{ext or '.csv'}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _kernel(cfg: ExperimentConfig) -> ArwKernel:
    if cfg.graph is None or cfg.n is None or cfg.beta is None:
        raise CliError("--graph, --n and --beta are required")
    try:
        g = parse_graph_spec(cfg.graph)
    except (GraphError, OSError) as exc:
        raise CliError(str(exc)) from exc
    return ArwKernel(g, cfg.n, cfg.beta, cfg.lazy)


def _provenance(cfg: ExperimentConfig) -> dict:
    # the destination is not part of the experiment; leaving it out keeps reruns byte-identical
    d = cfg.to_dict()
    d.pop("out", None)
    return d


def cmd_simulate(cfg: ExperimentConfig, threads: int) -> int:
    kernel = _kernel(cfg)
    p = cfg.params
    steps, stride = int(p.get("steps", 1000)), int(p.get("stride", 1))
    replicas = int(p.get("replicas", 1))
    if p.get("x0"):
        x0 = tuple(int(v) for v in str(p["x0"]).split(","))
    else:
        x0 = even_configuration(kernel.k, kernel.n)
    rngs = replica_rngs(cfg.seed, replicas) if replicas > 1 else [make_rng(cfg.seed)]

    def run(r):
        return simulate(kernel, x0, steps, rngs[r], stride=stride)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        trajectories = list(pool.map(run, range(replicas)))
    for r, tr in enumerate(trajectories):
        header = {"seed": cfg.seed, "graph": cfg.graph, "beta": format_beta(cfg.beta), "n": cfg.n,
                  "lazy": cfg.lazy, "steps": steps, "stride": stride, "x0": ",".join(map(str, x0)),
                  "config": json.dumps(_provenance(cfg), sort_keys=True)}
        if replicas > 1:
            header["replica"] = r
        columns = ["t"] + [f"x{v}" for v in range(kernel.k)]
        rows = ([int(t)] + [int(v) for v in s] for t, s in zip(tr.times, tr.states))
        _write_csv(_replica_path(cfg.out, r, replicas), header, columns, rows)
    return 0


def cmd_analyze(cfg: ExperimentConfig, threads: int) -> int:
    kernel = _kernel(cfg)
    if kernel.infinite_repulsion:
        raise CliError("exact analysis needs finite beta")
    p = cfg.params
    wanted = [w for w in ("stationary", "mixing_time", "cheeger", "reversibility") if p.get(w) not in (None, False)]
    if not wanted:
        raise CliError("choose at least one of --stationary, --mixing-time EPS, --cheeger, --reversibility")
    space = StateSpace(kernel.k, kernel.n, cap=int(p.get("cap", 200_000)))
    M = exact.build_matrix(kernel, space)
    pi = exact.stationary(M)
    out = {
        "config": _provenance(cfg),
        "states": space.states,
        "stationary_residual": exact.stationary_residual(M, pi),
        "tolerances": {"stochastic": exact.STOCHASTIC_TOL, "stationary": exact.STATIONARY_TOL,
                       "reversibility": exact.REVERSIBILITY_TOL},
    }
    if "stationary" in wanted:
        out["pi"] = pi
    if "mixing_time" in wanted:
        eps = float(p["mixing_time"])
        out["eps"] = eps
        out["t_mix"] = exact.mixing_time(M, pi, eps)
    if "cheeger" in wanted:
        phi, subset = exact.cheeger_constant(M, pi)
        out["phi_star"] = phi
        out["argmin_set"] = [space.states[a] for a in subset]
        b = exact.cheeger_sandwich(M, pi, float(p.get("eps") or 0.25), phi=phi, upper=kernel.lazy)
        out["cheeger_lower"] = b.lower
        out["cheeger_upper"] = b.upper
        out["pi_min"] = b.pi_min
        out["pi_min_analytic_bound"] = exact.analytic_pi_min_bound(kernel.n, kernel.graph, kernel.beta)
    if "reversibility" in wanted:
        r = exact.check_detailed_balance(M, pi)
        out["db_residual"] = r
        out["reversible"] = r <= 1e-10
    dump_json(out, cfg.out)
    return 0


def cmd_zchain(cfg: ExperimentConfig, threads: int) -> int:
    p = cfg.params
    try:
        D, delta, Delta = int(p["D"]), float(p["delta"]), int(p["Delta"])
    except KeyError as exc:
        raise CliError(f"missing --{exc.args[0]}") from exc
    if cfg.n is None or cfg.beta is None:
        raise CliError("--n and --beta are required")
    try:
        params = zchain.ZChainParams.from_model(D, cfg.beta, delta, Delta, cfg.n)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if p.get("hitting"):
        replicas = int(p.get("replicas", 1))
        max_steps = int(p.get("max_steps", 10**8))

        def run(rng):
            return zchain.simulate_z_hitting(params, cfg.n, delta, rng, max_steps)

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            times = list(pool.map(run, replica_rngs(cfg.seed, replicas)))
        header = {"seed": cfg.seed, "D": D, "beta": format_beta(cfg.beta), "delta": delta, "Delta": Delta,
                  "n": cfg.n, "p": params.p, "q": params.q, "max_steps": max_steps,
                  "threshold": zchain.hitting_threshold(cfg.n, delta), "config": json.dumps(_provenance(cfg), sort_keys=True)}
        rows = ([r, t if t >= 0 else max_steps, int(t < 0)] for r, t in enumerate(times))
        _write_csv(cfg.out, header, ["replica", "hitting_time", "censored"], rows)
        return 0
    lam = zchain.z_stationary(params)
    dump_json({"config": _provenance(cfg), "p": params.p, "q": params.q, "lambda": lam,
               "lambda0_closed_form": zchain.lambda_zero(params),
               "expected_occupancy_zero": zchain.expected_occupancy_zero(params)}, cfg.out)
    return 0


def cmd_coupling(cfg: ExperimentConfig, threads: int) -> int:
    p = cfg.params
    if p.get("no_contraction_check"):
        r = coupling.no_contraction_check()
        dump_json({"config": _provenance(cfg), "x": r.x, "y": r.y, "value": r.value, "dual_value": r.dual_value,
                   "rho_xy": r.rho_xy, "explicit_dual_value": r.explicit_dual_value,
                   "explicit_dual_feasibility": r.explicit_dual_feasibility}, cfg.out)
        return 0
    kernel = _kernel(cfg)
    if p.get("contraction"):
        rep = coupling.contraction_report(kernel, p.get("metric", "meeting-time"), policy=p.get("policy", "all-pairs"))
        edges = sorted(rep.edges, key=lambda e: -e.ratio)[: int(p.get("top", 10))]
        dump_json({"config": _provenance(cfg), "max_ratio": rep.max_ratio, "delta": rep.delta,
                   "edges_checked": len(rep.edges),
                   "worst_edges": [{"x": e.x, "y": e.y, "move": e.move, "wasserstein": e.wasserstein,
                                    "rho": e.rho, "ratio": e.ratio} for e in edges]}, cfg.out)
        return 0
    if p.get("tv_audit"):
        lam = p.get("lambda")
        audit = coupling.tv_lemma_audit(kernel, lam=None if lam is None else float(lam))
        dump_json({"config": _provenance(cfg), "holds": audit.holds,
                   "lemmas": [{"name": c.name, "applicable": c.applicable, "lhs": c.lhs, "bound": c.bound,
                               "margin": c.margin, "cases": c.cases, "witness": c.witness, "note": c.note}
                              for c in audit.checks]}, cfg.out)
        return 0
    raise CliError("choose --no-contraction-check, --contraction or --tv-audit")


def cmd_suite(cfg: ExperimentConfig, threads: int) -> int:
    name = cfg.params.get("name")
    if name not in suites.SUITES:
        raise CliError(f"suite must be one of {suites.SUITES}")
    results = suites.run_suite(name, outdir=cfg.out, threads=threads)
    for r in results:
        print(r.line())
    failed = sum(r.status == suites.FAIL for r in results)
    warned = sum(r.status == suites.WARN for r in results)
    print(f"{name}: {len(results) - failed - warned} ok, {warned} warn, {failed} fail")
    return 1 if failed else 0


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "zchain": cmd_zchain,
            "coupling": cmd_coupling, "suite": cmd_suite}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    common.add_argument("--out", default=None, help="output path (directory for suite figures)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for replicas")
    common.add_argument("--config", default=None, help="JSON experiment config; flags override it")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--graph", help="complete:K, path:K, cycle:K, star:K, grid:RxC or file:PATH")
    model.add_argument("--n", type=int, help="number of particles")
    model.add_argument("--beta", help="attraction parameter, or -inf")
    model.add_argument("--lazy", action="store_true", default=None, help="use the lazy chain (P+I)/2")

    parser = argparse.ArgumentParser(prog="arw", description="Attracting/repelling random walks toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, model], help="sample trajectories to CSV")
    p.add_argument("--steps", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--x0", help="comma-separated initial occupancies (default: as even as possible)")

    p = sub.add_parser("analyze", parents=[common, model], help="exact analysis to JSON")
    p.add_argument("--stationary", action="store_true", default=None)
    p.add_argument("--mixing-time", type=float, metavar="EPS", dest="mixing_time")
    p.add_argument("--cheeger", action="store_true", default=None)
    p.add_argument("--reversibility", action="store_true", default=None)
    p.add_argument("--eps", type=float, help="epsilon for the Cheeger upper bound (default 0.25)")
    p.add_argument("--cap", type=int, help="state-space size cap")

    p = sub.add_parser("zchain", parents=[common], help="comparison chain stationary law or hitting times")
    p.add_argument("--D", type=int, dest="D")
    p.add_argument("--beta")
    p.add_argument("--delta", type=float)
    p.add_argument("--Delta", type=int, dest="Delta")
    p.add_argument("--n", type=int)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--stationary", action="store_true", default=None)
    mode.add_argument("--hitting", action="store_true", default=None)
    p.add_argument("--replicas", type=int)
    p.add_argument("--max-steps", type=int, dest="max_steps")

    p = sub.add_parser("coupling", parents=[common, model], help="transport and TV-lemma checks")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--no-contraction-check", action="store_true", default=None, dest="no_contraction_check")
    mode.add_argument("--contraction", action="store_true", default=None)
    mode.add_argument("--tv-audit", action="store_true", default=None, dest="tv_audit")
    p.add_argument("--metric", choices=coupling.METRICS)
    p.add_argument("--policy", choices=coupling.POLICIES)
    p.add_argument("--lambda", type=float, dest="lambda")
    p.add_argument("--top", type=int, help="number of worst edges to report")

    p = sub.add_parser("suite", parents=[common], help="run a check battery")
    p.add_argument("name", choices=suites.SUITES)
    return parser


_TOP_LEVEL = ("graph", "n", "beta", "lazy", "seed", "out")
_SKIP = ("command", "config", "threads")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_dict() if args.config else {"command": args.command}
    if base.get("command") != args.command:
        raise CliError(f"config is for command {base.get('command')!r}, not {args.command!r}")
    params = dict(base.get("params") or {})
    for key, val in vars(args).items():
        if key in _SKIP or val is None:
            continue
        if key in _TOP_LEVEL:
            base[key] = val
        else:
            params[key] = val
    base["params"] = params
    base.setdefault("seed", 0)
    if base.get("seed") is None:
        base["seed"] = 0
    if base.get("beta") is not None:
        base["beta"] = parse_beta(base["beta"])
    base["lazy"] = bool(base.get("lazy", False))
    return ExperimentConfig.from_dict(base)


def _join_negative_values(argv: list[str]) -> list[str]:
    """Let ``--beta -inf`` through: argparse would read ``-inf`` as an option."""
    out = []
    it = iter(argv)
    for a in it:
        if a in ("--beta", "--lambda"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg, args.threads)
    except (CliError, ValueError, OSError) as exc:
        print(f"arw {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
