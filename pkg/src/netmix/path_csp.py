"""Path-selection CSP: one variable per demanded (flow, terminal) pair choosing a path index."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from netmix.centralized import SolveOutcome
from netmix.cfl import ClauseSystem, CflParams, CflResult, cfl_init, cfl_run, child_seeds
from netmix.mixing import MixingSolution, solution_cost
from netmix.network import NetworkInstance, as_demands
from netmix.paths import (
    DEFAULT_PATH_CAP,
    DemandPair,
    NoPath,
    PathCache,
    PathTable,
    SelectionEvaluator,
    build_path_table,
    derive_from_selection,
)


class PathCsp(ClauseSystem):
    """Clause ``k`` belongs to pair ``k``: its terminal's paths are edge-disjoint and
    no terminal receives an extraneous flow. Every variable takes part in every
    clause, so all flags agree with global satisfaction.
    """

    def __init__(self, instance: NetworkInstance, demands: Mapping[int, frozenset[int]], table: PathTable):
        self.instance = instance
        self.demands = demands
        self.table = table
        self.evaluator = SelectionEvaluator(instance, demands, table)
        self.pairs: list[DemandPair] = self.evaluator.pairs
        self.domain_sizes = [len(table.paths[k]) for k in self.pairs]
        self._memo: dict[tuple[int, ...], np.ndarray] = {}

    def selection(self, assignment: Iterable[int]) -> dict[DemandPair, int]:
        return {k: int(v) for k, v in zip(self.pairs, assignment)}

    def clause_values(self, assignment: np.ndarray) -> np.ndarray:
        key = tuple(int(v) for v in assignment)
        hit = self._memo.get(key)
        if hit is None:
            non_disjoint, impure, _ = self.evaluator.violations(self.selection(key))
            hit = np.array([t not in non_disjoint and not impure for _, t in self.pairs], dtype=bool)
            self._memo[key] = hit
        return hit

    def participation(self) -> list[list[int]]:
        every = list(range(len(self.pairs)))
        return [every for _ in self.pairs]

    def variable_flags(self, assignment: np.ndarray) -> np.ndarray:
        return np.full(len(self.pairs), bool(self.clause_values(assignment).all()))

    def all_satisfied(self, assignment: np.ndarray, flags: np.ndarray) -> bool:
        return bool(flags.all()) if len(flags) else bool(self.clause_values(assignment).all())


def build_path_csp(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None = None,
    *,
    cap: int = DEFAULT_PATH_CAP,
    cache: PathCache | None = None,
) -> PathCsp:
    dem = as_demands(instance, demands)
    table = build_path_table(instance, dem, cap, cache)
    for (p, t), paths in table.paths.items():
        if not paths:
            raise NoPath(f"no path carries flow {p} to terminal {t}")
    return PathCsp(instance, dem, table)


@dataclass
class CflSolve:
    """One CFL run: the derived solution (if converged) and its traces."""

    solution: MixingSolution | None
    selection: dict[DemandPair, int] | None
    cost: Fraction | None
    result: CflResult
    variables: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.solution is not None


def solve_path_cfl(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    params: CflParams,
    *,
    csp: PathCsp | None = None,
    record_history: bool = False,
) -> CflSolve:
    csp = csp or build_path_csp(instance, demands)
    state = cfl_init(csp.domain_sizes, params)
    result = cfl_run(state, csp, params, record_history=record_history)
    if result.assignment is None:
        return CflSolve(None, None, None, result, list(csp.pairs))
    sel = csp.selection(result.assignment)
    sol = derive_from_selection(instance, csp.demands, csp.table, sel)
    return CflSolve(sol, sel, solution_cost(instance, sol.z), result, list(csp.pairs))


@dataclass
class RestartOutcome:
    best: SolveOutcome
    costs: list[Fraction | None]
    running_min: list[Fraction | None]
    iterations: list[int]
    best_run: CflSolve | None = None
    last_run: CflSolve | None = None


def running_minimum(costs: Iterable[Fraction | None]) -> list[Fraction | None]:
    out: list[Fraction | None] = []
    cur: Fraction | None = None
    for c in costs:
        if c is not None and (cur is None or c < cur):
            cur = c
        out.append(cur)
    return out


def restart_loop(run_once, params: CflParams, restarts: int, demands) -> RestartOutcome:
    """Independent runs with child seeds; keeps the cheapest converged run."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best: CflSolve | None = None
    costs: list[Fraction | None] = []
    iters: list[int] = []
    for seed in child_seeds(params.seed, restarts):
        run = run_once(replace(params, seed=seed))
        costs.append(run.cost)
        iters.append(run.result.iterations)
        if run.converged and (best is None or run.cost < best.cost):
            best = run
    if best is None:
        outcome = SolveOutcome(False, demands=demands)
    else:
        outcome = SolveOutcome(True, best.cost, best.solution, best.selection, demands)
    outcome.stats["restarts"] = restarts
    return RestartOutcome(outcome, costs, running_minimum(costs), iters, best, run)


def path_restart_loop(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    params: CflParams,
    restarts: int,
    *,
    record_history: bool = False,
    cache: PathCache | None = None,
) -> RestartOutcome:
    dem = as_demands(instance, demands)
    try:
        csp = build_path_csp(instance, dem, cache=cache)
    except NoPath:
        if restarts < 1:
            raise ValueError("restarts must be >= 1") from None
        return RestartOutcome(SolveOutcome(False, demands=dem), [None] * restarts, [None] * restarts, [0] * restarts)
    return restart_loop(
        lambda p: solve_path_cfl(instance, dem, p, csp=csp, record_history=record_history), params, restarts, dem
    )
