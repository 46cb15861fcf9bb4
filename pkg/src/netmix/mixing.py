"""Global mixing vectors, mixing feasibility and full solution verification.

A mixing vector is an ``int`` bitmask over flows: bit ``p-1`` set means flow ``p``
may contribute to the symbol carried by the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from netmix.network import Edge, NetworkInstance, Violation, as_demands, flow_mask, mask_flows

Pair = tuple[int, int, int]
FKey = tuple[int, int, Edge]  # (terminal, flow, edge)


@dataclass
class MixingSolution:
    """Binary decision vectors of one mixing design.

    ``f`` is keyed by ``(t, p, (i, j))``; absent keys read as 0.
    """

    z: dict[Edge, int]
    f: dict[FKey, int]
    x: dict[Edge, int]
    beta: dict[Pair, int]
    paths: dict[tuple[int, int], tuple[Edge, ...]] = field(default_factory=dict)

    def used_edges(self) -> list[Edge]:
        return [e for e, v in self.z.items() if v]

    def flow_edges(self, t: int, p: int) -> list[Edge]:
        return [e for (tt, pp, e), v in self.f.items() if v and tt == t and pp == p]


def unit(p: int) -> int:
    return 1 << (p - 1)


def propagate_mixing(instance: NetworkInstance, beta: Mapping[Pair, int]) -> dict[Edge, int]:
    """Source edges get ``e_p``; every other edge ORs its beta-selected in-edges, in topological order."""
    x: dict[Edge, int] = {}
    src = instance.source_flow
    ins = instance.in_neighbors
    for i, j in instance.topo_edges:
        if i in src:
            x[(i, j)] = unit(src[i])
            continue
        v = 0
        for k in ins[i]:
            if beta.get((k, i, j), 0):
                v |= x[(k, i)]
        x[(i, j)] = v
    return x


def all_ones_beta(instance: NetworkInstance) -> dict[Pair, int]:
    return {pr: 1 for pr in instance.adjacent_pairs}


def delivering_edges(f: Mapping[FKey, int], demands: Mapping[int, frozenset[int]]) -> dict[int, set[Edge]]:
    """In-edges of each terminal that carry one of that terminal's own flows."""
    out: dict[int, set[Edge]] = {t: set() for t in demands}
    for (t, p, e), v in f.items():
        if v and t in out and e[1] == t:
            out[t].add(e)
    return out


def check_mixing_feasible(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    x: Mapping[Edge, int],
    delivering: Mapping[int, Iterable[Edge]] | None = None,
) -> bool:
    """True iff no terminal in-edge carries a flow the terminal does not demand.

    With ``delivering`` only the listed in-edges per terminal are checked (edges
    that carry no flow to the terminal are ignored by it); otherwise all in-edges.
    """
    dem = as_demands(instance, demands)
    for t, ds in dem.items():
        bad = ~flow_mask(ds)
        if delivering is None:
            edges = [(i, t) for i in instance.in_neighbors.get(t, ())]
        else:
            edges = delivering.get(t, ())
        for e in edges:
            if x.get(e, 0) & bad:
                return False
    return True


def solution_cost(instance: NetworkInstance, z: Mapping[Edge, int]) -> Fraction:
    cost = Fraction(0)
    for e, c in zip(instance.edges, instance.costs):
        if z.get(e, 0):
            cost += c
    return cost


def verify_solution(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    solution: MixingSolution,
    *,
    routing: bool = False,
) -> list[Violation]:
    """Check every mixing-problem constraint; an empty report means feasible.

    Terminal purity is enforced on the in-edges that deliver one of the
    terminal's flows. ``routing=True`` additionally forbids any mixing.
    """
    dem = as_demands(instance, demands)
    report: list[Violation] = []
    edges = instance.edges
    edge_set = set(edges)
    nflows = instance.num_flows
    full = (1 << nflows) - 1

    for e in edges:
        if solution.z.get(e, 0) not in (0, 1):
            report.append(Violation("z-binary", f"z{e} not binary", e))
        xv = solution.x.get(e)
        if xv is None:
            report.append(Violation("x-missing", f"x{e} missing", e))
        elif xv < 0 or xv & ~full:
            report.append(Violation("x-range", f"x{e} has bits outside the {nflows} flows", e))
    for e in solution.z:
        if e not in edge_set:
            report.append(Violation("unknown-edge", f"z given for non-edge {e}", e))
    for pr, v in solution.beta.items():
        if v not in (0, 1):
            report.append(Violation("beta-binary", f"beta{pr} not binary", pr))
    for (t, p, e), v in solution.f.items():
        if v not in (0, 1):
            report.append(Violation("f-binary", f"f[t={t},p={p}]{e} not binary", (t, p, e)))
        if t not in dem or p not in dem[t]:
            if v:
                report.append(Violation("f-undemanded", f"f set for undemanded pair (p={p}, t={t})", (t, p, e)))
        if e not in edge_set:
            report.append(Violation("unknown-edge", f"f given for non-edge {e}", e))
    if report:
        return report

    f = solution.f
    # f-z coupling: the flows to one terminal share an edge at most once.
    for e in edges:
        z = solution.z.get(e, 0)
        for t, ds in dem.items():
            s = sum(f.get((t, p, e), 0) for p in ds)
            if s > z:
                report.append(Violation("f-z", f"sum of f to terminal {t} on {e} is {s} > z={z}", (t, e)))

    # flow conservation
    for t, ds in dem.items():
        for p in sorted(ds):
            s_p = instance.sources.get(p)
            for i in instance.nodes:
                out = sum(f.get((t, p, (i, k)), 0) for k in instance.out_neighbors[i])
                inn = sum(f.get((t, p, (k, i)), 0) for k in instance.in_neighbors[i])
                sigma = 1 if i == s_p else (-1 if i == t else 0)
                if out - inn != sigma:
                    report.append(
                        Violation(
                            "conservation",
                            f"flow {p} to terminal {t}: net outflow {out - inn} at node {i}, expected {sigma}",
                            (t, p, i),
                        )
                    )

    x = solution.x
    for (t, p, e), v in f.items():
        if v and not (x[e] >> (p - 1)) & 1:
            report.append(Violation("f-x", f"f <= x fails: flow {p} to terminal {t} on {e} but x has no bit", (t, p, e)))

    src = instance.source_flow
    for e in edges:
        if e[0] in src:
            if x[e] != unit(src[e[0]]):
                report.append(Violation("x-source", f"source edge {e} must carry exactly e_{src[e[0]]}", e))
            continue
        # x must equal the OR of beta-selected incoming vectors (given the supplied x)
        v = 0
        for k in instance.in_neighbors[e[0]]:
            if solution.beta.get((k, e[0], e[1]), 0):
                v |= x[(k, e[0])]
        if v != x[e]:
            report.append(Violation("x-or", f"x{e}={mask_flows(x[e])} differs from OR of selected inputs {mask_flows(v)}", e))

    for t, es in delivering_edges(f, dem).items():
        bad = ~flow_mask(dem[t])
        for e in sorted(es):
            if x[e] & bad:
                report.append(
                    Violation(
                        "purity",
                        f"terminal {t} receives extraneous flows {mask_flows(x[e] & bad)} on {e}",
                        (t, e),
                    )
                )

    if routing:
        for e in edges:
            if bin(x[e]).count("1") > 1:
                report.append(Violation("routing", f"edge {e} mixes flows {mask_flows(x[e])}", e))
    return report
