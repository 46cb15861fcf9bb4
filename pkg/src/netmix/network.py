"""Directed acyclic network model: nodes, costed edges, flow sources and terminal demands."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

Edge = tuple[int, int]
Demands = Mapping[int, frozenset[int]]


class NetworkError(Exception):
    """Base class for model errors."""


class CyclicGraph(NetworkError):
    pass


class UnknownNode(NetworkError, KeyError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    subject: object = None

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Immutable network instance.

    Flows are numbered ``1..P``; ``sources[p]`` is the source node of flow ``p``.
    ``terminals`` keeps the declared terminal order together with each demand set.
    Construction performs no checks; call :func:`validate` for that.
    """

    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    costs: tuple[Fraction, ...]
    sources: Mapping[int, int]
    terminals: tuple[tuple[int, frozenset[int]], ...]

    @classmethod
    def build(
        cls,
        nodes: Iterable[int],
        edges: Iterable[tuple],
        sources: Mapping[int, int],
        terminals: Iterable[tuple[int, Iterable[int]]],
    ) -> "NetworkInstance":
        """Convenience constructor; ``edges`` items are ``(i, j)`` or ``(i, j, cost)``."""
        edge_list, cost_list = [], []
        for item in edges:
            if len(item) == 2:
                i, j = item
                c = 1
            else:
                i, j, c = item
            edge_list.append((int(i), int(j)))
            cost_list.append(Fraction(c) if not isinstance(c, float) else Fraction(str(c)))
        return cls(
            nodes=tuple(int(n) for n in nodes),
            edges=tuple(edge_list),
            costs=tuple(cost_list),
            sources={int(p): int(s) for p, s in sorted(sources.items())},
            terminals=tuple((int(t), frozenset(int(p) for p in ds)) for t, ds in terminals),
        )

    @property
    def num_flows(self) -> int:
        return len(self.sources)

    @property
    def flows(self) -> tuple[int, ...]:
        return tuple(sorted(self.sources))

    @property
    def demands(self) -> dict[int, frozenset[int]]:
        return {t: ds for t, ds in self.terminals}

    @cached_property
    def edge_index(self) -> dict[Edge, int]:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def cost_of(self) -> dict[Edge, Fraction]:
        return dict(zip(self.edges, self.costs))

    @cached_property
    def in_neighbors(self) -> dict[int, tuple[int, ...]]:
        ins: dict[int, list[int]] = {n: [] for n in self.nodes}
        for i, j in self.edges:
            ins.setdefault(j, []).append(i)
        return {n: tuple(sorted(v)) for n, v in ins.items()}

    @cached_property
    def out_neighbors(self) -> dict[int, tuple[int, ...]]:
        outs: dict[int, list[int]] = {n: [] for n in self.nodes}
        for i, j in self.edges:
            outs.setdefault(i, []).append(j)
        return {n: tuple(sorted(v)) for n, v in outs.items()}

    @cached_property
    def source_flow(self) -> dict[int, int]:
        """Map source node -> flow id."""
        return {s: p for p, s in self.sources.items()}

    @cached_property
    def adjacent_pairs(self) -> tuple[tuple[int, int, int], ...]:
        """All ``(k, i, j)`` with ``(k, i)`` and ``(i, j)`` both edges."""
        pairs = []
        for i, j in self.edges:
            for k in self.in_neighbors[i]:
                pairs.append((k, i, j))
        return tuple(sorted(pairs))

    @cached_property
    def topo_order(self) -> tuple[int, ...]:
        return tuple(topological_order(self))

    @cached_property
    def topo_edges(self) -> tuple[Edge, ...]:
        """Edges sorted so that every edge follows all edges entering its tail."""
        rank = {n: r for r, n in enumerate(self.topo_order)}
        return tuple(sorted(self.edges, key=lambda e: (rank[e[0]], rank[e[1]])))

    def with_demands(self, demands: Mapping[int, Iterable[int]]) -> "NetworkInstance":
        return NetworkInstance(
            nodes=self.nodes,
            edges=self.edges,
            costs=self.costs,
            sources=self.sources,
            terminals=tuple((t, frozenset(ds)) for t, ds in demands.items()),
        )


def as_demands(instance: NetworkInstance, demands: Mapping[int, Iterable[int]] | None = None) -> dict[int, frozenset[int]]:
    if demands is None:
        return instance.demands
    return {int(t): frozenset(ds) for t, ds in demands.items()}


def flow_mask(flows: Iterable[int]) -> int:
    """Pack flow ids into a bitmask (flow ``p`` -> bit ``p-1``)."""
    m = 0
    for p in flows:
        m |= 1 << (p - 1)
    return m


def mask_flows(mask: int) -> tuple[int, ...]:
    out = []
    p = 1
    while mask:
        if mask & 1:
            out.append(p)
        mask >>= 1
        p += 1
    return tuple(out)


def neighbors(instance: NetworkInstance, node: int) -> tuple[frozenset[int], frozenset[int]]:
    if node not in instance.in_neighbors:
        raise UnknownNode(node)
    return frozenset(instance.in_neighbors[node]), frozenset(instance.out_neighbors[node])


def topological_order(instance: NetworkInstance) -> list[int]:
    """Kahn's algorithm with ascending-id tie-break."""
    indeg = {n: 0 for n in instance.nodes}
    succ: dict[int, list[int]] = {n: [] for n in instance.nodes}
    for i, j in instance.edges:
        indeg[j] = indeg.get(j, 0) + 1
        succ.setdefault(i, []).append(j)
        indeg.setdefault(i, indeg.get(i, 0))
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in succ.get(n, ()):
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    if len(order) != len(indeg):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CyclicGraph(f"graph is cyclic (nodes on or behind a cycle: {stuck})")
    return order


def validate(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None = None,
    *,
    terminal_sinks: bool = True,
) -> list[Violation]:
    """List every violated structural invariant; an empty list means valid.

    ``terminal_sinks=False`` skips the "terminals have no outgoing edges" rule,
    which random demand realizations over transit nodes need.
    """
    report: list[Violation] = []
    node_set = set()
    for n in instance.nodes:
        if not isinstance(n, int) or n < 0:
            report.append(Violation("bad-node", f"node id {n!r} is not a non-negative integer", n))
        if n in node_set:
            report.append(Violation("duplicate-node", f"node {n} listed twice", n))
        node_set.add(n)

    seen_edges: set[Edge] = set()
    for (i, j), c in zip(instance.edges, instance.costs):
        for end in (i, j):
            if end not in node_set:
                report.append(Violation("unknown-node", f"edge ({i},{j}) references unknown node {end}", (i, j)))
        if i == j:
            report.append(Violation("self-loop", f"self-loop on node {i}", (i, j)))
        if (i, j) in seen_edges:
            report.append(
                Violation(
                    "parallel-edge",
                    f"parallel edge ({i},{j}); split it with an extra relay node per copy",
                    (i, j),
                )
            )
        seen_edges.add((i, j))
        if c < 0:
            report.append(Violation("negative-cost", f"edge ({i},{j}) has negative cost {c}", (i, j)))
    if len(instance.costs) != len(instance.edges):
        report.append(Violation("cost-mismatch", "cost list and edge list differ in length"))

    try:
        topological_order(instance)
    except CyclicGraph:
        report.append(Violation("cyclic", "graph is cyclic"))

    flows = sorted(instance.sources)
    if flows != list(range(1, len(flows) + 1)):
        report.append(Violation("bad-flow-id", f"flow ids must be 1..P, got {flows}", tuple(flows)))
    by_node: dict[int, int] = {}
    for p, s in instance.sources.items():
        if s not in node_set:
            report.append(Violation("unknown-node", f"source of flow {p} is unknown node {s}", p))
            continue
        if s in by_node:
            report.append(Violation("shared-source", f"flows {by_node[s]} and {p} share source node {s}", s))
        by_node[s] = p
        if any(j == s for _, j in instance.edges):
            report.append(Violation("source-incoming-edge", f"source has incoming edge (node {s}, flow {p})", s))

    dem = as_demands(instance, demands)
    demanded: set[int] = set()
    for t, ds in dem.items():
        if t not in node_set:
            report.append(Violation("unknown-node", f"terminal {t} is not a node", t))
            continue
        for p in sorted(ds):
            if p not in instance.sources:
                report.append(Violation("unknown-flow", f"terminal {t} demands unknown flow {p}", (t, p)))
        demanded |= ds
        if terminal_sinks and any(i == t for i, _ in instance.edges):
            report.append(Violation("terminal-outgoing-edge", f"terminal has outgoing edge (node {t})", t))
    if demands is None and len({t for t, _ in instance.terminals}) != len(instance.terminals):
        report.append(Violation("duplicate-terminal", "a terminal node is listed twice"))
    for p in flows:
        if p not in demanded:
            report.append(Violation("undemanded-flow", f"flow {p} is not demanded by any terminal", p))
    return report
