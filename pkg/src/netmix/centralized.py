"""Exact minimum-cost mixing: cost-ordered scan, demand-set expansion, and a brute-force oracle."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import networkx as nx

from netmix.mixing import MixingSolution, all_ones_beta, propagate_mixing, solution_cost, verify_solution
from netmix.network import Edge, NetworkError, NetworkInstance, as_demands
from netmix.paths import (
    DEFAULT_PATH_CAP,
    DemandPair,
    PathCache,
    SelectionEvaluator,
    build_path_table,
    derive_from_selection,
    disjoint_combinations,
)

Demands = dict[int, frozenset[int]]


class TooLarge(NetworkError):
    pass


@dataclass
class SolveOutcome:
    feasible: bool
    cost: Fraction | None = None
    solution: MixingSolution | None = None
    selection: dict[DemandPair, int] | None = None
    demands: Demands | None = None
    expansion: Demands | None = None
    stats: dict = field(default_factory=dict)


def _infeasible(dem: Demands, **stats) -> SolveOutcome:
    return SolveOutcome(False, demands=dem, stats=dict(stats))


def solve_centralized(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None = None,
    *,
    routing: bool = False,
    beta_all_one: bool = False,
    cap: int = DEFAULT_PATH_CAP,
    cache: PathCache | None = None,
    prune: bool = True,
) -> SolveOutcome:
    """Scan per-terminal disjoint combinations in non-decreasing union cost.

    The scan is a best-first search over prefixes of per-terminal combination
    indices keyed by ``(union cost, index tuple)``, so complete tuples surface
    in cost order with lexicographic tie-break. Prefixes whose finished
    terminals already receive extraneous flows are dropped (``prune``); this
    is safe because adding paths only adds mixing.
    """
    dem = as_demands(instance, demands)
    table = build_path_table(instance, dem, cap, cache)
    if any(not paths for paths in table.paths.values()):
        return _infeasible(dem, reason="no-path")

    terms = list(dem)
    per_term: list[list[tuple[int, ...]]] = []
    for t in terms:
        flows = sorted(dem[t])
        combos = disjoint_combinations([table.paths[(p, t)] for p in flows])
        if not combos:
            return _infeasible(dem, reason="no-disjoint-routing", terminal=t)
        per_term.append(combos)
    term_keys = [[(p, t) for p in sorted(dem[t])] for t in terms]
    combo_edges = [
        [frozenset(e for key, idx in zip(term_keys[k], c) for e in table.paths[key][idx]) for c in combos]
        for k, combos in enumerate(per_term)
    ]

    ev = SelectionEvaluator(instance, dem, table, routing=routing, beta_all_one=beta_all_one)
    cost_of = instance.cost_of

    def selection_of(prefix: tuple[int, ...]) -> dict[DemandPair, int]:
        sel = {}
        for k, ci in enumerate(prefix):
            sel.update(zip(term_keys[k], per_term[k][ci]))
        return sel

    heap: list[tuple[Fraction, tuple[int, ...]]] = [(Fraction(0), ())]
    edges_of: dict[tuple[int, ...], frozenset[Edge]] = {(): frozenset()}
    popped = 0
    while heap:
        cost, prefix = heapq.heappop(heap)
        used = edges_of.pop(prefix)
        popped += 1
        depth = len(prefix)
        if depth == len(terms):
            sel = selection_of(prefix)
            if ev.feasible(sel):
                sol = derive_from_selection(instance, dem, table, sel, beta_all_one=beta_all_one)
                return SolveOutcome(True, solution_cost(instance, sol.z), sol, sel, dem, stats={"popped": popped})
            continue
        if prune and depth:
            sel = selection_of(prefix)
            nd, impure, mixed = ev.violations(sel, [k for ks in term_keys[:depth] for k in ks])
            if nd or impure or mixed:
                continue
        for ci, es in enumerate(combo_edges[depth]):
            child = prefix + (ci,)
            union = used | es
            extra = sum((cost_of[e] for e in es - used), Fraction(0))
            edges_of[child] = union
            heapq.heappush(heap, (cost + extra, child))
    return _infeasible(dem, reason="no-feasible-combination", popped=popped)


def expansion_candidates(instance: NetworkInstance, demands: Mapping[int, Iterable[int]] | None = None) -> list[Demands]:
    """All expansions ``P_t <= Pbar_t <= P``, by ascending number of added demands then lexicographically."""
    dem = as_demands(instance, demands)
    flows = set(instance.flows)
    options = []
    for t, ds in dem.items():
        missing = sorted(flows - ds)
        adds = [c for r in range(len(missing) + 1) for c in itertools.combinations(missing, r)]
        options.append(adds)
    combos = list(itertools.product(*options))
    combos.sort(key=lambda cs: (sum(len(c) for c in cs), cs))
    return [{t: dem[t] | frozenset(c) for t, c in zip(dem, cs)} for cs in combos]


def expand_and_solve(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    solve_one: Callable[[Demands], SolveOutcome],
) -> SolveOutcome:
    """Minimum of ``solve_one`` over every demand-set expansion; the first expansion found wins ties."""
    dem = as_demands(instance, demands)
    best: SolveOutcome | None = None
    tried = 0
    for exp in expansion_candidates(instance, dem):
        tried += 1
        out = solve_one(exp)
        if out.feasible and (best is None or out.cost < best.cost):
            best = out
    if best is None:
        return SolveOutcome(False, demands=dem, stats={"expansions": tried})
    best.expansion = best.demands
    best.demands = dem
    best.stats["expansions"] = tried
    return best


def solve_with_expansion(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None = None,
    *,
    routing: bool = False,
    beta_all_one: bool = False,
    cap: int = DEFAULT_PATH_CAP,
    prune: bool = True,
) -> SolveOutcome:
    cache = PathCache(instance, cap)
    return expand_and_solve(
        instance,
        demands,
        lambda exp: solve_centralized(instance, exp, routing=routing, beta_all_one=beta_all_one, cache=cache, prune=prune),
    )


# ---------------------------------------------------------------- oracle

def _nx_paths(instance: NetworkInstance, dem: Demands) -> dict[DemandPair, list[tuple[Edge, ...]]]:
    g = nx.DiGraph()
    g.add_nodes_from(instance.nodes)
    g.add_edges_from(instance.edges)
    out = {}
    for t, ds in dem.items():
        for p in sorted(ds):
            s = instance.sources[p]
            out[(p, t)] = [tuple(zip(ns, ns[1:])) for ns in nx.all_simple_paths(g, s, t)] if s != t else []
    return out


def _oracle_solution(instance: NetworkInstance, dem: Demands, chosen: Mapping[DemandPair, tuple[Edge, ...]]) -> MixingSolution:
    f = {(t, p, e): 1 for (p, t), path in chosen.items() for e in path}
    used = {e for path in chosen.values() for e in path}
    z = {e: int(e in used) for e in instance.edges}
    beta = {pr: 0 for pr in instance.adjacent_pairs}
    for path in chosen.values():
        for a, b in zip(path, path[1:]):
            beta[(a[0], a[1], b[1])] = 1
    return MixingSolution(z=z, f=f, x=propagate_mixing(instance, beta), beta=beta, paths=dict(chosen))


def brute_force_oracle(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None = None,
    *,
    mode: str = "paths",
    routing: bool = False,
    beta_all_one: bool = False,
    max_edges: int = 20,
    max_checks: int = 2_000_000,
) -> SolveOutcome:
    """Exhaustive reference solver.

    ``mode="paths"`` tries every combination of simple paths (listed by
    networkx) with the path-induced beta. ``mode="assignments"`` additionally
    tries every beta over all adjacent edge pairs. Each candidate is checked
    with :func:`verify_solution`.
    """
    if mode not in ("paths", "assignments"):
        raise ValueError(f"unknown oracle mode {mode!r}")
    if len(instance.edges) > max_edges:
        raise TooLarge(f"{len(instance.edges)} edges exceed the oracle bound {max_edges}")
    dem = as_demands(instance, demands)
    paths = _nx_paths(instance, dem)
    keys = list(paths)
    n_sel = 1
    for k in keys:
        n_sel *= len(paths[k])
    pairs = instance.adjacent_pairs
    n_beta = 1 if (mode == "paths" or beta_all_one) else 2 ** len(pairs)
    if n_sel * n_beta > max_checks:
        raise TooLarge(f"{n_sel * n_beta} candidates exceed the oracle bound {max_checks}")

    best: SolveOutcome | None = None
    fixed_beta = all_ones_beta(instance) if beta_all_one else None
    for combo in itertools.product(*(paths[k] for k in keys)):
        chosen = dict(zip(keys, combo))
        # per-terminal edge-disjointness is part of verify_solution's f-z check,
        # but z must be the union for the cost to be minimal
        base = _oracle_solution(instance, dem, chosen)
        cost = solution_cost(instance, base.z)
        if best is not None and cost >= best.cost:
            continue
        if fixed_beta is not None:
            betas: Iterable[dict] = [fixed_beta]
        elif mode == "paths":
            betas = [base.beta]
        else:
            betas = ({pr: b for pr, b in zip(pairs, bits)} for bits in itertools.product((0, 1), repeat=len(pairs)))
        for beta in betas:
            sol = MixingSolution(z=base.z, f=base.f, x=propagate_mixing(instance, beta), beta=dict(beta), paths=base.paths)
            if not verify_solution(instance, dem, sol, routing=routing):
                best = SolveOutcome(True, cost, sol, None, dem)
                break
    return best if best is not None else SolveOutcome(False, demands=dem)
