"""Scalar linear network codes over a prime field built on top of a mixing solution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from netmix.mixing import MixingSolution, Pair
from netmix.network import Edge, NetworkError, NetworkInstance, as_demands

Vector = tuple[int, ...]


class FieldTooSmall(NetworkError, ValueError):
    pass


class NotPrime(NetworkError, ValueError):
    pass


class NoDecodableCode(NetworkError):
    def __init__(self, tries: int):
        self.tries = tries
        super().__init__(f"no decodable code found in {tries} tries")


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % k == 0:
            return False
        k += 1
    return True


def smallest_prime_above(n: int) -> int:
    q = n + 1
    while not is_prime(q):
        q += 1
    return q


def check_field(q: int, num_terminals: int | None = None) -> None:
    if not is_prime(q):
        raise NotPrime(f"field size {q} is not prime")
    if num_terminals is not None and q <= num_terminals:
        raise FieldTooSmall(f"field size {q} must exceed the number of terminals {num_terminals}")


# ---------------------------------------------------------------- GF(q) linear algebra

def rank_mod(matrix: Sequence[Sequence[int]], q: int) -> int:
    rows = [[v % q for v in r] for r in matrix]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = pow(rows[rank][col], -1, q)
        rows[rank] = [v * inv % q for v in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                factor = rows[r][col]
                rows[r] = [(a - factor * b) % q for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def solve_mod(matrix: Sequence[Sequence[int]], rhs: Sequence[int], q: int) -> list[int]:
    """Solve ``matrix @ s = rhs`` for a square nonsingular matrix over GF(q)."""
    n = len(matrix)
    aug = [[v % q for v in row] + [b % q] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise ValueError("matrix is singular over GF(q)")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], -1, q)
        aug[col] = [v * inv % q for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [(a - factor * b) % q for a, b in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


# ---------------------------------------------------------------- code construction

@dataclass
class LinearCode:
    q: int
    alpha: dict[Pair, int]
    c: dict[Edge, Vector]
    matrices: dict[int, list[list[int]]]
    last_edges: dict[int, list[Edge]]  # per terminal, one per demanded flow (ascending)
    demands: dict[int, frozenset[int]]

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "alpha": [[k, i, j, v] for (k, i, j), v in sorted(self.alpha.items())],
            "c": [{"edge": [i, j], "vector": list(v)} for (i, j), v in self.c.items()],
            "terminals": [
                {
                    "node": t,
                    "demands": sorted(self.demands[t]),
                    "last_edges": [list(e) for e in self.last_edges[t]],
                    "matrix": self.matrices[t],
                }
                for t in self.demands
            ],
        }


def assign_coefficients(
    instance: NetworkInstance,
    beta: Mapping[Pair, int],
    q: int,
    rng: np.random.Generator,
    num_terminals: int | None = None,
) -> dict[Pair, int]:
    """Uniform coefficients on pairs with beta = 1 (zero allowed), zero elsewhere."""
    check_field(q, num_terminals if num_terminals is not None else len(instance.terminals))
    alpha = {}
    for pr in instance.adjacent_pairs:
        alpha[pr] = int(rng.integers(0, q)) if beta.get(pr, 0) else 0
    return alpha


def identity_coefficients(instance: NetworkInstance, solution: MixingSolution) -> dict[Pair, int]:
    """Coefficient 1 between consecutive edges of every selected path, 0 elsewhere."""
    alpha = {pr: 0 for pr in instance.adjacent_pairs}
    for path in solution_paths(instance, solution).values():
        for (k, i), (_, j) in zip(path, path[1:]):
            alpha[(k, i, j)] = 1
    return alpha


def propagate_code(instance: NetworkInstance, alpha: Mapping[Pair, int], q: int) -> dict[Edge, Vector]:
    nflows = instance.num_flows
    src = instance.source_flow
    c: dict[Edge, Vector] = {}
    for i, j in instance.topo_edges:
        if i in src:
            v = [0] * nflows
            v[src[i] - 1] = 1
        else:
            v = [0] * nflows
            for k in instance.in_neighbors[i]:
                a = alpha.get((k, i, j), 0)
                if a:
                    v = [(acc + a * w) % q for acc, w in zip(v, c[(k, i)])]
        c[(i, j)] = tuple(v)
    return c


def solution_paths(instance: NetworkInstance, solution: MixingSolution) -> dict[tuple[int, int], tuple[Edge, ...]]:
    """Selected path per (flow, terminal), recovered from ``f`` when not stored."""
    if solution.paths:
        return dict(solution.paths)
    out = {}
    pairs = sorted({(p, t) for (t, p, _), v in solution.f.items() if v})
    for p, t in pairs:
        node, walk = instance.sources[p], []
        while node != t:
            nxt = [k for k in instance.out_neighbors[node] if solution.f.get((t, p, (node, k)))]
            if len(nxt) != 1:
                raise ValueError(f"f does not encode a unique path for flow {p} to terminal {t}")
            walk.append((node, nxt[0]))
            node = nxt[0]
        out[(p, t)] = tuple(walk)
    return out


def terminal_matrices(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    solution: MixingSolution,
    c: Mapping[Edge, Vector],
) -> tuple[dict[int, list[list[int]]], dict[int, list[Edge]]]:
    """Rows: last edge of each demanded flow's path (ascending flow); columns: demanded flows (ascending)."""
    dem = as_demands(instance, demands)
    paths = solution_paths(instance, solution)
    mats, lasts = {}, {}
    for t, ds in dem.items():
        flows = sorted(ds)
        last = [paths[(p, t)][-1] for p in flows]
        lasts[t] = last
        mats[t] = [[c[e][p - 1] for p in flows] for e in last]
    return mats, lasts


def verify_decodable(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    c: Mapping[Edge, Vector],
    solution: MixingSolution,
    q: int,
) -> bool:
    """Every terminal matrix is nonsingular and delivering edges carry no extraneous flow."""
    dem = as_demands(instance, demands)
    mats, lasts = terminal_matrices(instance, dem, solution, c)
    for t, ds in dem.items():
        if rank_mod(mats[t], q) < len(ds):
            return False
        for e in lasts[t]:
            if any(c[e][p - 1] % q for p in instance.flows if p not in ds):
                return False
    return True


def build_code(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    solution: MixingSolution,
    alpha: Mapping[Pair, int],
    q: int,
) -> LinearCode:
    dem = as_demands(instance, demands)
    c = propagate_code(instance, alpha, q)
    mats, lasts = terminal_matrices(instance, dem, solution, c)
    return LinearCode(q, dict(alpha), c, mats, lasts, dem)


def sample_code(
    instance: NetworkInstance,
    demands: Mapping[int, Iterable[int]] | None,
    solution: MixingSolution,
    q: int,
    rng: np.random.Generator | int | None = None,
    max_tries: int = 32,
) -> LinearCode:
    """Draw random coefficients until the code is decodable at every terminal."""
    dem = as_demands(instance, demands)
    check_field(q, len(dem))
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    for _ in range(max_tries):
        alpha = assign_coefficients(instance, solution.beta, q, gen, len(dem))
        code = build_code(instance, dem, solution, alpha, q)
        if verify_decodable(instance, dem, code.c, solution, q):
            return code
    raise NoDecodableCode(max_tries)


def edge_symbols(instance: NetworkInstance, code: LinearCode, symbols: Sequence[int]) -> dict[Edge, int]:
    """Symbols on every edge by the local recursion from the sources."""
    q = code.q
    src = instance.source_flow
    out: dict[Edge, int] = {}
    for i, j in instance.topo_edges:
        if i in src:
            out[(i, j)] = symbols[src[i] - 1] % q
        else:
            out[(i, j)] = sum(code.alpha.get((k, i, j), 0) * out[(k, i)] for k in instance.in_neighbors[i]) % q
    return out


def roundtrip(instance: NetworkInstance, code: LinearCode, symbols: Sequence[int]) -> dict[int, dict[int, int]]:
    """Transmit ``symbols`` (one per flow) and decode at every terminal."""
    q = code.q
    local = edge_symbols(instance, code, symbols)
    for e, v in local.items():
        glob = sum(cv * s for cv, s in zip(code.c[e], symbols)) % q
        if glob != v:
            raise AssertionError(f"edge {e}: local symbol {v} differs from coding-vector symbol {glob}")
    decoded = {}
    for t, ds in code.demands.items():
        flows = sorted(ds)
        received = [local[e] for e in code.last_edges[t]]
        values = solve_mod(code.matrices[t], received, q)
        decoded[t] = dict(zip(flows, values))
    return decoded
