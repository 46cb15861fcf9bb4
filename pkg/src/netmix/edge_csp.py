"""Edge-local CSP: each edge picks a (flow indicator, mixing vector) pair from its admissible set.

Clauses are flow conservation per node and, per non-source edge, the existence
of local mixing coefficients reproducing the edge's mixing vector from its
inputs. An edge variable listens to the conservation clauses at both ends, its
own mixing clause, and the mixing clauses of the edges leaving its head.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from netmix.cfl import ClauseSystem, CflParams, cfl_init, cfl_run
from netmix.mixing import MixingSolution, Pair, propagate_mixing, solution_cost
from netmix.network import Edge, NetworkError, NetworkInstance, as_demands, flow_mask
from netmix.path_csp import CflSolve, RestartOutcome, restart_loop

DEFAULT_DOMAIN_CAP = 4096

Column = tuple[int, int]  # (terminal, flow)


class DomainExplosion(NetworkError):
    pass


@dataclass(frozen=True)
class EdgeDomain:
    edge: Edge
    columns: tuple[Column, ...]
    f: np.ndarray  # (D, len(columns)) of 0/1
    x: np.ndarray  # (D,) bitmasks

    def __len__(self) -> int:
        return len(self.x)

    def member(self, k: int) -> tuple[dict[Column, int], int]:
        return {c: int(v) for c, v in zip(self.columns, self.f[k])}, int(self.x[k])


def demand_columns(demands: Mapping[int, frozenset[int]]) -> tuple[Column, ...]:
    return tuple((t, p) for t, ds in demands.items() for p in sorted(ds))


def enumerate_domain(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    edge: Edge,
    cap: int = DEFAULT_DOMAIN_CAP,
) -> EdgeDomain:
    """All admissible ``(f, x)`` for one edge, ordered by flow choice then ascending ``x``.

    Per terminal at most one of its flows uses the edge; ``x`` covers every
    flow that does; a source edge carries exactly its own flow; an edge into a
    terminal that delivers one of that terminal's flows carries nothing else.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    dem = as_demands(instance, demands)
    cols = demand_columns(dem)
    col_index = {c: k for k, c in enumerate(cols)}
    i, j = edge
    nflows = instance.num_flows
    src = instance.source_flow
    fixed_x = 1 << (src[i] - 1) if i in src else None
    head_ok = ~flow_mask(dem[j]) if j in dem else 0

    f_rows: list[list[int]] = []
    x_vals: list[int] = []
    options = [[None] + sorted(dem[t]) for t in dem]
    for choice in itertools.product(*options):
        row = [0] * len(cols)
        need = 0
        for t, p in zip(dem, choice):
            if p is not None:
                row[col_index[(t, p)]] = 1
                need |= 1 << (p - 1)
        delivers = j in dem and choice[list(dem).index(j)] is not None
        xs = [fixed_x] if fixed_x is not None else range(1 << nflows)
        for x in xs:
            if x & need != need:
                continue
            if delivers and x & head_ok:
                continue
            f_rows.append(row)
            x_vals.append(x)
            if len(x_vals) > cap:
                raise DomainExplosion(f"domain of edge {edge} exceeds {cap} members")
    f = np.array(f_rows, dtype=np.int32).reshape(len(f_rows), len(cols))
    return EdgeDomain(edge, cols, f, np.array(x_vals, dtype=np.int64))


def phi_f(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    node: int,
    f: Mapping[tuple[int, int, Edge], int],
) -> int:
    """Flow conservation at ``node`` for every demanded (flow, terminal); ``f`` keyed ``(t, p, edge)``."""
    dem = as_demands(instance, demands)
    for t, ds in dem.items():
        for p in ds:
            out = sum(f.get((t, p, (node, k)), 0) for k in instance.out_neighbors[node])
            inn = sum(f.get((t, p, (k, node)), 0) for k in instance.in_neighbors[node])
            sigma = 1 if node == instance.sources[p] else (-1 if node == t else 0)
            if out - inn != sigma:
                return 0
    return 1


def greedy_inputs(x_out: int, x_in: Iterable[int]) -> list[bool]:
    """Inputs whose flows all lie inside ``x_out``; selecting exactly these is a witness when one exists."""
    return [(v & ~x_out) == 0 for v in x_in]


def phi_x(x_out: int, x_in: Iterable[int]) -> int:
    """1 iff some subset of the input vectors ORs to ``x_out``."""
    x_in = list(x_in)
    acc = 0
    for v, take in zip(x_in, greedy_inputs(x_out, x_in)):
        if take:
            acc |= v
    return int(acc == x_out)


def clause_partition(instance: NetworkInstance, edge: Edge) -> set[tuple[str, object]]:
    """Clause ids an edge listens to: ``("f", node)`` and ``("x", edge)``."""
    i, j = edge
    if edge not in instance.edge_index:
        raise KeyError(f"unknown edge {edge}")
    ids: set[tuple[str, object]] = {("f", i), ("f", j)}
    if i not in instance.source_flow:
        ids.add(("x", edge))
    for k in instance.out_neighbors[j]:
        ids.add(("x", (j, k)))
    return ids


class EdgeCsp(ClauseSystem):
    def __init__(
        self,
        instance: NetworkInstance,
        demands: Mapping[int, Iterable[int]] | None = None,
        cap: int = DEFAULT_DOMAIN_CAP,
    ):
        dem = as_demands(instance, demands)
        self.instance = instance
        self.demands = dem
        self.columns = demand_columns(dem)
        self.edges = list(instance.edges)
        self.domains = [enumerate_domain(instance, dem, e, cap) for e in self.edges]
        self.domain_sizes = [len(d) for d in self.domains]
        m = len(self.edges)
        eidx = {e: k for k, e in enumerate(self.edges)}
        nodes = list(instance.nodes)
        nidx = {n: k for k, n in enumerate(nodes)}
        self.nodes = nodes

        self.offsets = np.concatenate([[0], np.cumsum(self.domain_sizes)[:-1]]).astype(np.int64) if m else np.zeros(0, np.int64)
        ncol = len(self.columns)
        self.f_all = np.concatenate([d.f for d in self.domains]) if m else np.zeros((0, ncol), np.int32)
        self.x_all = np.concatenate([d.x for d in self.domains]) if m else np.zeros(0, np.int64)

        self.incidence = np.zeros((len(nodes), m), dtype=np.int32)
        for k, (i, j) in enumerate(self.edges):
            self.incidence[nidx[i], k] += 1
            self.incidence[nidx[j], k] -= 1
        self.sigma = np.zeros((len(nodes), ncol), dtype=np.int32)
        for c, (t, p) in enumerate(self.columns):
            self.sigma[nidx[instance.sources[p]], c] += 1
            self.sigma[nidx[t], c] -= 1

        self.tail = np.array([nidx[i] for i, _ in self.edges], dtype=np.int64)
        self.head = np.array([nidx[j] for _, j in self.edges], dtype=np.int64)
        src = instance.source_flow
        self.has_x_clause = np.array([i not in src for i, _ in self.edges], dtype=bool)
        width_in = max((len(instance.in_neighbors[i]) for i, _ in self.edges), default=0)
        self.preds = np.full((m, max(width_in, 1)), m, dtype=np.int64)  # m = sentinel (zero vector)
        for k, (i, _) in enumerate(self.edges):
            for c, h in enumerate(instance.in_neighbors[i]):
                self.preds[k, c] = eidx[(h, i)]
        width_out = max((len(instance.out_neighbors[j]) for _, j in self.edges), default=0)
        self.succ = np.full((m, max(width_out, 1)), m, dtype=np.int64)  # m = sentinel (true)
        for k, (_, j) in enumerate(self.edges):
            for c, h in enumerate(instance.out_neighbors[j]):
                self.succ[k, c] = eidx[(j, h)]

    # ---- evaluation

    def _chosen(self, assignment: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rows = self.offsets + assignment
        return self.f_all[rows], self.x_all[rows]

    def _node_and_x(self, assignment: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f, x = self._chosen(assignment)
        node_ok = np.all(self.incidence @ f == self.sigma, axis=1)
        x_ext = np.append(x, 0)
        xin = x_ext[self.preds]
        inside = (xin & ~x[:, None]) == 0
        orv = np.bitwise_or.reduce(np.where(inside, xin, 0), axis=1)
        x_ok = (orv == x) | ~self.has_x_clause
        return node_ok, x_ok

    def clause_values(self, assignment: np.ndarray) -> np.ndarray:
        node_ok, x_ok = self._node_and_x(assignment)
        return np.concatenate([node_ok, x_ok[self.has_x_clause]])

    def clause_ids(self) -> list[tuple[str, object]]:
        return [("f", n) for n in self.nodes] + [("x", e) for e, h in zip(self.edges, self.has_x_clause) if h]

    def participation(self) -> list[list[int]]:
        pos = {cid: k for k, cid in enumerate(self.clause_ids())}
        return [sorted(pos[c] for c in clause_partition(self.instance, e)) for e in self.edges]

    def variable_flags(self, assignment: np.ndarray) -> np.ndarray:
        node_ok, x_ok = self._node_and_x(assignment)
        self._last = (assignment, node_ok, x_ok)
        succ_ok = np.append(x_ok, True)[self.succ].all(axis=1)
        return node_ok[self.tail] & node_ok[self.head] & x_ok & succ_ok

    def all_satisfied(self, assignment: np.ndarray, flags: np.ndarray) -> bool:
        last = getattr(self, "_last", None)
        if last is not None and last[0] is assignment:
            node_ok, x_ok = last[1], last[2]
        else:
            node_ok, x_ok = self._node_and_x(assignment)
        return bool(node_ok.all() and x_ok.all())

    # ---- solution assembly

    def assemble(self, assignment: np.ndarray) -> MixingSolution:
        """Build ``(z, f, x, beta)`` from a satisfying assignment."""
        inst = self.instance
        f_rows, x_vals = self._chosen(np.asarray(assignment, dtype=np.int64))
        f: dict[tuple[int, int, Edge], int] = {}
        x: dict[Edge, int] = {}
        z: dict[Edge, int] = {}
        for e, row, xv in zip(self.edges, f_rows, x_vals):
            x[e] = int(xv)
            for (t, p), v in zip(self.columns, row):
                if v:
                    f[(t, p, e)] = 1
            z[e] = max((int(sum(row[c] for c, (tt, _) in enumerate(self.columns) if tt == t)) for t in self.demands), default=0)
        beta: dict[Pair, int] = {}
        for k, i, j in inst.adjacent_pairs:
            beta[(k, i, j)] = int((x[(k, i)] & ~x[(i, j)]) == 0)
        derived = propagate_mixing(inst, beta)
        if derived != x:
            raise AssertionError("recovered local coefficients do not reproduce the mixing vectors")
        paths = {}
        for t, ds in self.demands.items():
            for p in sorted(ds):
                node, walk = inst.sources[p], []
                while node != t:
                    nxt = [k for k in inst.out_neighbors[node] if f.get((t, p, (node, k)))]
                    if len(nxt) != 1:
                        break
                    walk.append((node, nxt[0]))
                    node = nxt[0]
                paths[(p, t)] = tuple(walk)
        return MixingSolution(z=z, f=f, x=x, beta=beta, paths=paths)


def solve_edge_cfl(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    params: CflParams,
    *,
    csp: EdgeCsp | None = None,
    cap: int = DEFAULT_DOMAIN_CAP,
    record_history: bool = False,
) -> CflSolve:
    csp = csp or EdgeCsp(instance, demands, cap)
    state = cfl_init(csp.domain_sizes, params)
    result = cfl_run(state, csp, params, record_history=record_history)
    if result.assignment is None:
        return CflSolve(None, None, None, result, list(csp.edges))
    sol = csp.assemble(result.assignment)
    return CflSolve(sol, None, solution_cost(instance, sol.z), result, list(csp.edges))


def correct_events(run: CflSolve) -> list[tuple[int, Edge, int, bool]]:
    """Per iteration and edge: the chosen domain index and whether it equals the final choice."""
    hist = run.result.history
    if hist is None or run.result.assignment is None:
        return []
    final = run.result.assignment
    out = []
    for it, chosen in enumerate(hist, start=1):
        for e, c, fin in zip(run.variables, chosen, final):
            out.append((it, e, int(c), bool(c == fin)))
    return out


def edge_restart_loop(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    params: CflParams,
    restarts: int,
    cap: int = DEFAULT_DOMAIN_CAP,
    *,
    record_history: bool = False,
) -> RestartOutcome:
    dem = as_demands(instance, demands)
    csp = EdgeCsp(instance, dem, cap)
    return restart_loop(
        lambda p: solve_edge_cfl(instance, dem, p, csp=csp, record_history=record_history), params, restarts, dem
    )
