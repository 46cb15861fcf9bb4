"""``netmix`` command line: solve one instance or run a random-demand experiment."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


from netmix.centralized import (
    SolveOutcome,
    TooLarge,
    brute_force_oracle,
    expand_and_solve,
    solve_centralized,
    solve_with_expansion,
)
from netmix.cfl import CflParams
from netmix.edge_csp import DomainExplosion, correct_events, edge_restart_loop
from netmix.instances import (
    BUILTINS,
    BadConfig,
    DemandGenConfig,
    InstanceSyntaxError,
    UnknownTopology,
    ValidationFailed,
    cost_to_json,
    load_instance,
    random_demands,
    serialize_instance,
    solution_to_dict,
)
from netmix.network import NetworkError, NetworkInstance, validate
from netmix.path_csp import RestartOutcome, path_restart_loop
from netmix.paths import PathCache, PathExplosion
from netmix.rlnc import FieldTooSmall, NoDecodableCode, NotPrime, sample_code

EXIT_OK, EXIT_NO_SOLUTION, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "NETMIX_SEED"


class ConfigError(Exception):
    pass


def parse_demands(text: str) -> dict[int, frozenset[int]]:
    """``"8:1;7:1,2"`` -> ``{8: {1}, 7: {1, 2}}``."""
    out: dict[int, frozenset[int]] = {}
    try:
        for part in filter(None, (s.strip() for s in text.split(";"))):
            node, flows = part.split(":")
            out[int(node)] = frozenset(int(p) for p in flows.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"bad demand string {text!r}; expected e.g. '8:1;7:1,2'") from None
    if not out:
        raise ConfigError("empty demand string")
    return out


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------- solve

@dataclass
class SolveRun:
    outcome: SolveOutcome
    status: str
    restarts: RestartOutcome | None = None


def _cfl_runner(instance: NetworkInstance, args: argparse.Namespace, params: CflParams, cache: PathCache):
    record = bool(args.variable_trace)
    runs: list[RestartOutcome] = []

    def one(dem) -> SolveOutcome:
        if args.algorithm == "path-cfl":
            ro = path_restart_loop(instance, dem, params, args.restarts, record_history=record, cache=cache)
        else:
            ro = edge_restart_loop(instance, dem, params, args.restarts, record_history=record)
        runs.append(ro)
        ro.best.stats["restart_outcome"] = ro
        return ro.best

    return one, runs


def run_solve(instance: NetworkInstance, args: argparse.Namespace) -> SolveRun:
    dem = instance.demands
    if args.algorithm in ("centralized", "oracle"):
        if args.algorithm == "centralized":
            if args.expand:
                out = solve_with_expansion(instance, dem, routing=args.routing, beta_all_one=args.beta_all_one)
            else:
                out = solve_centralized(instance, dem, routing=args.routing, beta_all_one=args.beta_all_one)
        else:
            one = lambda d: brute_force_oracle(instance, d, routing=args.routing, beta_all_one=args.beta_all_one)  # noqa: E731
            out = expand_and_solve(instance, dem, one) if args.expand else one(dem)
        return SolveRun(out, "optimal" if out.feasible else "infeasible")

    if args.routing or args.beta_all_one:
        raise ConfigError("--routing and --beta-all-one apply to the centralized and oracle solvers only")
    params = CflParams(args.a, args.b, args.max_iterations, args.seed)
    one, runs = _cfl_runner(instance, args, params, PathCache(instance))
    out = expand_and_solve(instance, dem, one) if args.expand else one(dem)
    ro = out.stats.pop("restart_outcome", None) or (runs[-1] if runs else None)
    for r in runs:
        r.best.stats.pop("restart_outcome", None)
    return SolveRun(out, "feasible" if out.feasible else "budget_exhausted", ro)


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt_cost(c: Fraction | None) -> str:
    return "" if c is None else str(cost_to_json(c))


def export_traces(run: SolveRun, args: argparse.Namespace) -> None:
    ro = run.restarts
    if ro is None:
        if args.trace or args.restart_trace or args.variable_trace:
            raise ConfigError("trace files need a CFL algorithm")
        return
    shown = ro.best_run or ro.last_run
    if args.trace:
        rows = [] if shown is None else [(i, n, str(done).lower()) for i, n, done in shown.result.trace]
        _write_csv(args.trace, ["iteration", "satisfied_count", "all_satisfied"], rows)
    if args.restart_trace:
        rows = [
            (k, str(c is not None).lower(), _fmt_cost(c), _fmt_cost(m))
            for k, (c, m) in enumerate(zip(ro.costs, ro.running_min))
        ]
        _write_csv(args.restart_trace, ["restart_index", "feasible", "cost", "running_min"], rows)
    if args.variable_trace:
        history = [] if shown is None or shown.result.history is None else shown.result.history
        if args.algorithm == "path-cfl":
            header = ["iteration", "flow", "terminal", "path_index"]
            rows = [
                (it, p, t, int(n))
                for it, chosen in enumerate(history, start=1)
                for (p, t), n in zip(shown.variables, chosen)
            ]
        else:
            header = ["iteration", "tail", "head", "choice", "matches_final"]
            events = correct_events(shown) if history else []
            rows = [(it, e[0], e[1], k, str(ok).lower()) for it, e, k, ok in events]
        _write_csv(args.variable_trace, header, rows)


def cmd_solve(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    if args.demands:
        instance = instance.with_demands(parse_demands(args.demands))
        report = validate(instance)
        if report:
            raise ValidationFailed(report)
    run = run_solve(instance, args)
    out = run.outcome
    extra: dict = {
        "algorithm": args.algorithm,
        "status": run.status,
        "demands": [{"node": t, "demands": sorted(ds)} for t, ds in instance.demands.items()],
    }
    if args.algorithm in ("path-cfl", "edge-cfl"):
        extra["seed"] = args.seed
        extra["restarts"] = args.restarts
    code_doc = None
    exit_code = EXIT_OK if out.feasible else EXIT_NO_SOLUTION
    if out.feasible and args.rlnc_q is not None:
        served = out.expansion or out.demands
        try:
            code = sample_code(instance, served, out.solution, args.rlnc_q, args.seed, args.max_tries)
            code_doc = code.to_dict()
            extra["rlnc"] = {"q": args.rlnc_q, "decodable": True}
        except NoDecodableCode as exc:
            extra["rlnc"] = {"q": args.rlnc_q, "decodable": False, "tries": exc.tries}
            extra["status"] = "no_decodable_code"
            exit_code = EXIT_NO_SOLUTION
    doc = solution_to_dict(instance, out.solution if out.feasible else None, expansion=out.expansion, extra=extra)
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.code_output:
        if code_doc is None:
            raise ConfigError("--code-output needs --rlnc-q and a feasible solution")
        with open(args.code_output, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(code_doc, indent=2) + "\n")
    export_traces(run, args)
    return exit_code


# ---------------------------------------------------------------- experiment

ALGORITHMS = {
    "expansion": dict(expand=True),
    "problem1": dict(),
    "two-step": dict(beta_all_one=True),
    "routing": dict(routing=True),
}


def _solve_realization(job: tuple[NetworkInstance, dict, tuple[str, ...]]) -> dict[str, Fraction | None]:
    instance, dem, algos = job
    cache = PathCache(instance)
    costs: dict[str, Fraction | None] = {}
    for name in algos:
        opts = dict(ALGORITHMS[name])
        if opts.pop("expand", False):
            out = expand_and_solve(instance, dem, lambda d: solve_centralized(instance, d, cache=cache, **opts))
        else:
            out = solve_centralized(instance, dem, cache=cache, **opts)
        costs[name] = out.cost if out.feasible else None
    return costs


def run_experiment(
    instance: NetworkInstance, config: DemandGenConfig, algorithms: Sequence[str], jobs: int = 1
) -> tuple[dict, list[dict]]:
    """Per-realization costs and means over realizations feasible for every algorithm."""
    if config.realizations < 1:
        raise BadConfig("realization count must be >= 1")
    for name in algorithms:
        if name not in ALGORITHMS:
            raise BadConfig(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    realizations = random_demands(instance, config)
    for dem in realizations:
        report = [v for v in validate(instance, dem, terminal_sinks=False) if v.kind != "undemanded-flow"]
        if report:
            raise BadConfig("; ".join(str(v) for v in report))
    work = [(instance, dem, tuple(algorithms)) for dem in realizations]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_realization, work))
    else:
        results = [_solve_realization(w) for w in work]

    rows = []
    sums = {a: Fraction(0) for a in algorithms}
    included = 0
    for k, (dem, costs) in enumerate(zip(realizations, results)):
        ok = all(c is not None for c in costs.values())
        if ok:
            included += 1
            for a in algorithms:
                sums[a] += costs[a]
        rows.append({"realization": k, "demands": dem, "costs": costs, "included": ok})
    stats = {
        "realizations": len(realizations),
        "included": included,
        "excluded": len(realizations) - included,
        "infeasible": {a: sum(r["costs"][a] is None for r in rows) for a in algorithms},
        "mean_cost": {a: (float(sums[a] / included) if included else None) for a in algorithms},
        "config": {
            "terminals": config.terminals,
            "terminal_pool": list(config.terminal_pool),
            "q": config.q,
            "seed": config.seed,
            "generator": "numpy PCG64 (default_rng)",
        },
    }
    return stats, rows


def cmd_experiment(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    try:
        pool = tuple(int(v) for v in args.pool.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad terminal pool {args.pool!r}") from None
    algos = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    config = DemandGenConfig(
        terminals=args.terminals,
        terminal_pool=pool,
        source_pool=tuple(instance.sources.values()),
        q=args.q,
        realizations=args.realizations,
        seed=args.seed,
    )
    stats, rows = run_experiment(instance, config, algos, args.jobs)
    text = json.dumps(stats, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv:
        _write_csv(
            args.csv,
            ["realization", "demands", "included"] + algos,
            [
                (
                    r["realization"],
                    ";".join(f"{t}:{','.join(map(str, sorted(ds)))}" for t, ds in r["demands"].items()),
                    str(r["included"]).lower(),
                    *(_fmt_cost(r["costs"][a]) for a in algos),
                )
                for r in rows
            ],
        )
    return EXIT_OK


# ---------------------------------------------------------------- misc commands

def cmd_builtin(args: argparse.Namespace) -> int:
    sys.stdout.write(serialize_instance(load_instance(args.name)) + "\n")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from netmix.instances import parse_instance

    with open(args.path, encoding="utf-8") as fh:
        inst = parse_instance(fh.read(), check=False)
    report = validate(inst)
    for v in report:
        sys.stdout.write(f"{v}\n")
    return EXIT_OK if not report else EXIT_NO_SOLUTION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netmix", description="Minimum-cost linear network mixing")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True, help=f"builtin name ({', '.join(BUILTINS)}) or JSON file")
    s.add_argument("--algorithm", choices=["centralized", "path-cfl", "edge-cfl", "oracle"], default="centralized")
    s.add_argument("--expand", action="store_true", help="optimize over demand-set expansions")
    s.add_argument("--routing", action="store_true", help="forbid mixing (routing baseline)")
    s.add_argument("--beta-all-one", action="store_true", help="fix every local mixing coefficient to 1")
    s.add_argument("--demands", help="override demands, e.g. '8:1;7:1,2'")
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--b", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    s.add_argument("--max-iterations", type=int, default=10_000)
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--rlnc-q", type=int, default=None, help="also sample a decodable code over GF(q)")
    s.add_argument("--max-tries", type=int, default=32)
    s.add_argument("--output", help="solution document path (default stdout)")
    s.add_argument("--code-output", help="code document path")
    s.add_argument("--trace", help="engine trace CSV path")
    s.add_argument("--restart-trace", help="restart CSV path")
    s.add_argument("--variable-trace", help="per-variable choice CSV path")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="mean costs over random two-source demand realizations")
    e.add_argument("--instance", required=True)
    e.add_argument("--pool", required=True, help="comma-separated terminal pool")
    e.add_argument("--terminals", type=int, default=2)
    e.add_argument("--q", type=float, default=1.5, help="expected demands per terminal, in [1, 2]")
    e.add_argument("--realizations", type=int, default=100)
    e.add_argument("--algorithms", default="expansion,problem1,routing")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--output", help="statistics JSON path (default stdout)")
    e.add_argument("--csv", help="per-realization CSV path")
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("builtin", help="print a builtin instance document")
    b.add_argument("name", choices=sorted(BUILTINS))
    b.set_defaults(func=cmd_builtin)

    v = sub.add_parser("validate", help="list structural problems of an instance document")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        return args.func(args)
    except (
        ConfigError,
        OSError,
        InstanceSyntaxError,
        ValidationFailed,
        UnknownTopology,
        BadConfig,
        FieldTooSmall,
        NotPrime,
        TooLarge,
        PathExplosion,
        DomainExplosion,
        ValueError,
    ) as exc:
        sys.stderr.write(f"netmix: error: {exc}\n")
        return EXIT_CONFIG
    except NetworkError as exc:
        sys.stderr.write(f"netmix: error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
