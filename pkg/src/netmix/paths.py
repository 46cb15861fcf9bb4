"""Flow path enumeration, per-terminal edge-disjoint combinations, and the
solution derived from a path selection.

Path indices are 0-based throughout the library.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from netmix.mixing import MixingSolution, Pair, all_ones_beta, propagate_mixing, unit
from netmix.network import Edge, NetworkError, NetworkInstance, as_demands, flow_mask

Path = tuple[Edge, ...]
DemandPair = tuple[int, int]  # (flow, terminal)

DEFAULT_PATH_CAP = 10_000


class PathExplosion(NetworkError):
    pass


class DisjointnessViolated(NetworkError):
    pass


class NoPath(NetworkError):
    pass


def path_nodes(path: Path) -> tuple[int, ...]:
    if not path:
        return ()
    return (path[0][0],) + tuple(j for _, j in path)


def enumerate_paths(instance: NetworkInstance, source: int, terminal: int, cap: int = DEFAULT_PATH_CAP) -> list[Path]:
    """All simple directed ``source -> terminal`` paths, lexicographic by node sequence."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    outs = instance.out_neighbors
    found: list[Path] = []
    on_path = {source}

    def dfs(node: int, edges: list[Edge]) -> None:
        if node == terminal:
            found.append(tuple(edges))
            if len(found) > cap:
                raise PathExplosion(f"more than {cap} paths from {source} to {terminal}")
            return
        for nxt in outs.get(node, ()):
            if nxt in on_path:
                continue
            on_path.add(nxt)
            edges.append((node, nxt))
            dfs(nxt, edges)
            edges.pop()
            on_path.discard(nxt)

    if source == terminal:
        return []
    dfs(source, [])
    return found


@dataclass
class PathTable:
    """Enumerated paths per demanded ``(flow, terminal)`` pair."""

    paths: dict[DemandPair, tuple[Path, ...]]

    def pairs(self) -> list[DemandPair]:
        return list(self.paths)

    def sizes(self) -> dict[DemandPair, int]:
        return {k: len(v) for k, v in self.paths.items()}


class PathCache:
    """Memoizes path lists per ``(source node, terminal)``; demand sets do not matter."""

    def __init__(self, instance: NetworkInstance, cap: int = DEFAULT_PATH_CAP):
        self.instance = instance
        self.cap = cap
        self._memo: dict[tuple[int, int], tuple[Path, ...]] = {}

    def get(self, source: int, terminal: int) -> tuple[Path, ...]:
        key = (source, terminal)
        if key not in self._memo:
            self._memo[key] = tuple(enumerate_paths(self.instance, source, terminal, self.cap))
        return self._memo[key]


def demand_pairs(demands: Mapping[int, frozenset[int]]) -> list[DemandPair]:
    """Demanded pairs in terminal order, flows ascending within a terminal."""
    return [(p, t) for t, ds in demands.items() for p in sorted(ds)]


def build_path_table(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None = None,
    cap: int = DEFAULT_PATH_CAP,
    cache: PathCache | None = None,
) -> PathTable:
    dem = as_demands(instance, demands)
    cache = cache or PathCache(instance, cap)
    return PathTable({(p, t): cache.get(instance.sources[p], t) for p, t in demand_pairs(dem)})


def disjoint_combinations(paths_per_flow: Sequence[Sequence[Path]]) -> list[tuple[int, ...]]:
    """Index tuples (one per flow, in the given order) whose paths are pairwise edge-disjoint."""
    edge_sets = [[frozenset(p) for p in paths] for paths in paths_per_flow]
    out: list[tuple[int, ...]] = []
    n = len(edge_sets)

    def rec(k: int, used: frozenset, chosen: list[int]) -> None:
        if k == n:
            out.append(tuple(chosen))
            return
        for idx, es in enumerate(edge_sets[k]):
            if used & es:
                continue
            chosen.append(idx)
            rec(k + 1, used | es, chosen)
            chosen.pop()

    rec(0, frozenset(), [])
    return out


def _selected(table: PathTable, selection: Mapping[DemandPair, int]) -> dict[DemandPair, Path]:
    out = {}
    for key, paths in table.paths.items():
        idx = selection[key]
        if not 0 <= idx < len(paths):
            raise IndexError(f"path index {idx} out of range for pair {key} ({len(paths)} paths)")
        out[key] = paths[idx]
    return out


def derive_from_selection(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    table: PathTable,
    selection: Mapping[DemandPair, int],
    *,
    beta_all_one: bool = False,
) -> MixingSolution:
    """Build ``(z, f, x, beta)`` from one path per demanded pair.

    ``f`` marks the selected path edges, ``z`` is the per-edge max over terminals,
    ``beta`` is 1 exactly on consecutive edges of some selected path and ``x``
    follows by propagation. ``beta_all_one`` replaces beta by all ones.
    """
    dem = as_demands(instance, demands)
    chosen = _selected(table, selection)
    for t, ds in dem.items():
        seen: set[Edge] = set()
        for p in sorted(ds):
            es = set(chosen[(p, t)])
            if seen & es:
                raise DisjointnessViolated(f"paths to terminal {t} share edges {sorted(seen & es)}")
            seen |= es
    f = {}
    z = {e: 0 for e in instance.edges}
    beta: dict[Pair, int] = {pr: 0 for pr in instance.adjacent_pairs}
    for (p, t), path in chosen.items():
        for e in path:
            f[(t, p, e)] = 1
            z[e] = 1
        for (k, i), (_, j) in zip(path, path[1:]):
            beta[(k, i, j)] = 1
    if beta_all_one:
        beta = all_ones_beta(instance)
    x = propagate_mixing(instance, beta)
    return MixingSolution(z=z, f=f, x=x, beta=beta, paths={(p, t): path for (p, t), path in chosen.items()})


class SelectionEvaluator:
    """Fast clause evaluation for path selections over a fixed path table.

    Used by the centralized scan and by the path-based CFL, where the same
    table is evaluated many times.
    """

    def __init__(
        self,
        instance: NetworkInstance,
        demands: Mapping[int, Iterable[int]] | None,
        table: PathTable,
        *,
        routing: bool = False,
        beta_all_one: bool = False,
    ):
        self.instance = instance
        self.demands = as_demands(instance, demands)
        self.table = table
        self.routing = routing
        self.beta_all_one = beta_all_one
        self.pairs = demand_pairs(self.demands)
        rank = {e: r for r, e in enumerate(instance.topo_edges)}
        self.rank = rank
        self.edge_sets = {key: [frozenset(p) for p in table.paths[key]] for key in self.pairs}
        # per path: list of (edge, predecessor edge or None) in path order
        self.links = {
            key: [tuple(zip(p, (None,) + p[:-1])) for p in table.paths[key]] for key in self.pairs
        }
        self.bad = {t: ~flow_mask(ds) for t, ds in self.demands.items()}
        self.src = instance.source_flow
        self.fixed_x = propagate_mixing(instance, all_ones_beta(instance)) if beta_all_one else None

    def disjoint(self, selection: Mapping[DemandPair, int], terminal: int) -> bool:
        used: set[Edge] = set()
        for p in sorted(self.demands[terminal]):
            es = self.edge_sets[(p, terminal)][selection[(p, terminal)]]
            if used & es:
                return False
            used |= es
        return True

    def mixing_vectors(self, selection: Mapping[DemandPair, int], keys: Iterable[DemandPair] | None = None) -> dict[Edge, int]:
        """Mixing vectors on the edges of the selected paths (restricted to ``keys``)."""
        if self.fixed_x is not None:
            return self.fixed_x
        preds: dict[Edge, set[Edge]] = {}
        for key in self.pairs if keys is None else keys:
            for e, prev in self.links[key][selection[key]]:
                s = preds.setdefault(e, set())
                if prev is not None:
                    s.add(prev)
        x: dict[Edge, int] = {}
        for e in sorted(preds, key=self.rank.__getitem__):
            if e[0] in self.src:
                x[e] = unit(self.src[e[0]])
            else:
                v = 0
                for prev in preds[e]:
                    v |= x[prev]
                x[e] = v
        return x

    def violations(
        self, selection: Mapping[DemandPair, int], keys: Iterable[DemandPair] | None = None
    ) -> tuple[set[int], set[int], bool]:
        """Terminals failing disjointness, terminals failing purity, and whether any edge mixes.

        The mixing flag is only computed (otherwise False) in routing mode. With
        ``keys`` only those pairs count as selected; terminals whose pairs are
        all present are checked.
        """
        keys = list(self.pairs if keys is None else keys)
        present = set(keys)
        complete = [t for t, ds in self.demands.items() if all((p, t) in present for p in ds)]
        non_disjoint = {t for t in complete if not self.disjoint(selection, t)}
        x = self.mixing_vectors(selection, keys)
        impure: set[int] = set()
        for t in complete:
            bad = self.bad[t]
            for p in self.demands[t]:
                path = self.table.paths[(p, t)][selection[(p, t)]]
                if path and x[path[-1]] & bad:
                    impure.add(t)
                    break
        mixed = False
        if self.routing:
            mixed = any(bin(v).count("1") > 1 for v in x.values())
        return non_disjoint, impure, mixed

    def feasible(self, selection: Mapping[DemandPair, int]) -> bool:
        nd, imp, mixed = self.violations(selection)
        return not nd and not imp and not mixed

    def cost(self, selection: Mapping[DemandPair, int]) -> Fraction:
        used: set[Edge] = set()
        for key in self.pairs:
            used |= self.edge_sets[key][selection[key]]
        cost_of = self.instance.cost_of
        return sum((cost_of[e] for e in used), Fraction(0))


def path_clause(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    table: PathTable,
    selection: Mapping[DemandPair, int],
    pair: DemandPair,
) -> int:
    """1 iff the pair's terminal has edge-disjoint paths and no terminal receives an extraneous flow."""
    ev = SelectionEvaluator(instance, demands, table)
    non_disjoint, impure, _ = ev.violations(selection)
    return int(pair[1] not in non_disjoint and not impure)


def iter_selections(table: PathTable) -> Iterator[dict[DemandPair, int]]:
    keys = table.pairs()
    for combo in itertools.product(*(range(len(table.paths[k])) for k in keys)):
        yield dict(zip(keys, combo))
