"""Instance documents, solution documents, builtin topologies and random demand realizations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from netmix.mixing import MixingSolution, solution_cost
from netmix.network import NetworkError, NetworkInstance, Violation, mask_flows, validate
from netmix.paths import path_nodes


class InstanceSyntaxError(NetworkError, ValueError):
    """Malformed instance document; ``position`` locates the problem."""

    def __init__(self, message: str, position: str | None = None):
        self.position = position
        super().__init__(f"{message} (at {position})" if position else message)


class ValidationFailed(NetworkError):
    def __init__(self, report: Sequence[Violation]):
        self.report = list(report)
        super().__init__("; ".join(str(v) for v in self.report))


class UnknownTopology(NetworkError, KeyError):
    pass


class BadConfig(NetworkError, ValueError):
    pass


# ---------------------------------------------------------------- parsing

def _number(value: Any, where: str) -> Fraction:
    if isinstance(value, bool):
        raise InstanceSyntaxError("cost must be a number", where)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            pass
    raise InstanceSyntaxError(f"cost {value!r} is not a number", where)


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, str) and value.lstrip("-").isdigit():
            return int(value)
        raise InstanceSyntaxError(f"expected an integer, got {value!r}", where)
    return value


def instance_from_dict(doc: Mapping[str, Any], *, check: bool = True) -> NetworkInstance:
    if not isinstance(doc, Mapping):
        raise InstanceSyntaxError("document must be a JSON object", "$")
    for key in ("nodes", "edges", "sources", "terminals"):
        if key not in doc:
            raise InstanceSyntaxError(f"missing field {key!r}", "$")
    if not isinstance(doc["nodes"], list):
        raise InstanceSyntaxError("nodes must be a list", "$.nodes")
    nodes = [_int(n, f"$.nodes[{k}]") for k, n in enumerate(doc["nodes"])]

    if not isinstance(doc["edges"], list):
        raise InstanceSyntaxError("edges must be a list", "$.edges")
    edges = []
    for k, e in enumerate(doc["edges"]):
        where = f"$.edges[{k}]"
        if not isinstance(e, Mapping) or "from" not in e or "to" not in e:
            raise InstanceSyntaxError("edge needs 'from' and 'to'", where)
        cost = _number(e.get("cost", 1), where + ".cost")
        edges.append((_int(e["from"], where + ".from"), _int(e["to"], where + ".to"), cost))

    if not isinstance(doc["sources"], Mapping):
        raise InstanceSyntaxError("sources must be an object flow -> node", "$.sources")
    sources = {}
    for p, s in doc["sources"].items():
        flow = _int(p, f"$.sources[{p!r}]")
        if flow < 1:
            raise InstanceSyntaxError(f"flow id {p!r} must be >= 1", f"$.sources[{p!r}]")
        sources[flow] = _int(s, f"$.sources[{p!r}]")
    flows = sorted(sources)
    if flows != list(range(1, len(flows) + 1)):
        raise InstanceSyntaxError(f"flow ids must be 1..P, got {flows}", "$.sources")

    if not isinstance(doc["terminals"], list):
        raise InstanceSyntaxError("terminals must be a list", "$.terminals")
    terminals = []
    for k, t in enumerate(doc["terminals"]):
        where = f"$.terminals[{k}]"
        if not isinstance(t, Mapping) or "node" not in t or "demands" not in t:
            raise InstanceSyntaxError("terminal needs 'node' and 'demands'", where)
        if not isinstance(t["demands"], list):
            raise InstanceSyntaxError("demands must be a list", where + ".demands")
        ds = [_int(p, f"{where}.demands[{m}]") for m, p in enumerate(t["demands"])]
        for m, p in enumerate(ds):
            if p not in sources:
                raise InstanceSyntaxError(f"unknown flow id {p}", f"{where}.demands[{m}]")
        terminals.append((_int(t["node"], where + ".node"), ds))

    inst = NetworkInstance.build(nodes, edges, sources, terminals)
    if check:
        report = validate(inst)
        if report:
            raise ValidationFailed(report)
    return inst


def parse_instance(text: str, *, check: bool = True) -> NetworkInstance:
    """Parse a JSON instance document and validate it."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceSyntaxError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return instance_from_dict(doc, check=check)


def cost_to_json(c: Fraction) -> int | float | str:
    if c.denominator == 1:
        return int(c)
    f = float(c)
    if Fraction(str(f)) == c:
        return f
    return f"{c.numerator}/{c.denominator}"


def instance_to_dict(instance: NetworkInstance) -> dict[str, Any]:
    return {
        "nodes": list(instance.nodes),
        "edges": [{"from": i, "to": j, "cost": cost_to_json(c)} for (i, j), c in zip(instance.edges, instance.costs)],
        "sources": {str(p): s for p, s in sorted(instance.sources.items())},
        "terminals": [{"node": t, "demands": sorted(ds)} for t, ds in instance.terminals],
    }


def serialize_instance(instance: NetworkInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)


def load_instance(ref: str) -> NetworkInstance:
    """Builtin name or path to a JSON document."""
    if ref in BUILTINS:
        return builtin(ref)
    with open(ref, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------- builtins

def _fig3() -> NetworkInstance:
    edges = [
        (1, 3), (3, 8), (3, 9), (9, 11), (11, 8), (3, 4), (4, 6),
        (6, 7), (2, 5), (5, 7), (9, 10), (5, 4), (6, 10),
    ]
    return NetworkInstance.build(range(1, 12), edges, {1: 1, 2: 2}, [(8, {1}), (7, {1, 2}), (10, {1, 2})])


def _butterfly() -> NetworkInstance:
    # 1, 2 sources; 5, 6 relays; 3 -> 4 the shared edge; 7, 8 terminals
    edges = [(1, 5), (2, 6), (5, 3), (6, 3), (3, 4), (4, 7), (4, 8), (5, 7), (6, 8)]
    return NetworkInstance.build(range(1, 9), edges, {1: 1, 2: 2}, [(7, {2}), (8, {1})])


SPRINT_EXPENSIVE = {(10, 5): 20, (10, 6): 20, (9, 4): 10}


def _sprint_core() -> NetworkInstance:
    edges = [
        (8, 10), (10, 7), (7, 4), (4, 1), (1, 2), (10, 5), (5, 1), (7, 9),
        (9, 2), (11, 9), (11, 10), (7, 6), (10, 6), (8, 6), (9, 4),
    ]
    return NetworkInstance.build(
        [1, 2, 4, 5, 6, 7, 8, 9, 10, 11],
        [(i, j, SPRINT_EXPENSIVE.get((i, j), 1)) for i, j in edges],
        {1: 8, 2: 11},
        [(2, {1, 2}), (6, {2})],
    )


BUILTINS = {"fig3": _fig3, "butterfly": _butterfly, "sprint-core": _sprint_core}


def builtin(name: str) -> NetworkInstance:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise UnknownTopology(f"unknown builtin topology {name!r}; choose from {sorted(BUILTINS)}") from None


# ---------------------------------------------------------------- random demands

@dataclass(frozen=True)
class DemandGenConfig:
    """Two-source random demand protocol.

    Each realization picks ``terminals`` distinct nodes from ``terminal_pool``;
    each picks one source uniformly and adds the other with probability
    ``q - 1``. The generator is numpy's PCG64 via ``default_rng(seed)``.
    """

    terminals: int = 2
    terminal_pool: tuple[int, ...] = ()
    source_pool: tuple[int, ...] = ()
    q: float = 1.5
    realizations: int = 100
    seed: int = 0

    def check(self) -> None:
        if not 1 <= self.q <= 2:
            raise BadConfig(f"q must lie in [1, 2], got {self.q}")
        if self.terminals < 1:
            raise BadConfig("terminal count must be >= 1")
        if len(set(self.terminal_pool)) < self.terminals:
            raise BadConfig(f"terminal pool has {len(set(self.terminal_pool))} nodes, need {self.terminals}")
        if self.realizations < 0:
            raise BadConfig("realization count must be >= 0")


def random_demands(
    instance: NetworkInstance, config: DemandGenConfig, rng: np.random.Generator | None = None
) -> list[dict[int, frozenset[int]]]:
    config.check()
    if instance.num_flows != 2:
        raise BadConfig(f"the random demand protocol needs exactly 2 flows, instance has {instance.num_flows}")
    if config.source_pool and set(config.source_pool) != set(instance.sources.values()):
        raise BadConfig("source pool must equal the instance's source nodes")
    pool = np.array(sorted(set(config.terminal_pool)))
    for t in pool:
        if int(t) not in instance.in_neighbors:
            raise BadConfig(f"terminal pool node {t} is not in the instance")
        if int(t) in instance.source_flow:
            raise BadConfig(f"terminal pool node {t} is a source")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    extra = config.q - 1.0
    out = []
    for _ in range(config.realizations):
        chosen = rng.choice(pool, size=config.terminals, replace=False)
        real: dict[int, frozenset[int]] = {}
        for t in chosen:
            first = int(rng.integers(1, 3))
            ds = {first}
            if rng.random() < extra:
                ds.add(3 - first)
            real[int(t)] = frozenset(ds)
        out.append(real)
    return out


# ---------------------------------------------------------------- solution documents

def solution_to_dict(
    instance: NetworkInstance,
    solution: MixingSolution | None,
    *,
    expansion: Mapping[int, frozenset[int]] | None = None,
    extra: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    """Structured solution document; ``None`` encodes infeasibility."""
    if solution is None:
        doc: dict[str, Any] = {"feasible": False, "cost": None, "edges": [], "paths": [], "x": [], "beta": []}
    else:
        doc = {
            "feasible": True,
            "cost": cost_to_json(solution_cost(instance, solution.z)),
            "edges": [[i, j] for (i, j) in instance.edges if solution.z.get((i, j), 0)],
            "paths": [
                {"flow": p, "terminal": t, "nodes": list(path_nodes(path))}
                for (p, t), path in sorted(solution.paths.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            ],
            "x": [
                {"edge": [i, j], "flows": list(mask_flows(solution.x[(i, j)]))}
                for (i, j) in instance.edges
                if solution.z.get((i, j), 0)
            ],
            "beta": [list(pr) for pr, v in sorted(solution.beta.items()) if v],
        }
    if expansion is not None:
        doc["expansion"] = [{"node": t, "demands": sorted(ds)} for t, ds in expansion.items()]
    if extra:
        doc.update(extra)
    return doc


def write_solution(
    instance: NetworkInstance,
    solution: MixingSolution | None,
    format: str = "json",
    **kwargs: Any,
) -> str:
    if format != "json":
        raise ValueError(f"unsupported solution format {format!r}")
    return json.dumps(solution_to_dict(instance, solution, **kwargs), indent=2)
