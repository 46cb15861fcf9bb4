"""Communication-free learning over finite-domain constraint systems.

Every variable keeps a probability vector over its domain. Each iteration all
variables draw simultaneously, each learns whether the clauses it takes part in
hold, and then either locks onto its draw (satisfied) or relaxes toward it
(unsatisfied). Distributions are stored as rows of a zero-padded matrix.

Random streams: variable ``m`` draws from its own PCG64 generator spawned from
``numpy.random.SeedSequence(seed)``; one uniform is consumed per variable per
iteration, so trace options never change the draws.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

_BLOCK = 512


class EmptyDomain(ValueError):
    pass


@dataclass(frozen=True)
class CflParams:
    a: float = 1.0
    b: float = 0.01
    max_iterations: int = 10_000
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self) -> None:
        if not 0 < self.a <= 1:
            raise ValueError(f"a must lie in (0, 1], got {self.a}")
        if not 0 < self.b <= 1:
            raise ValueError(f"b must lie in (0, 1], got {self.b}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    def seed_sequence(self) -> np.random.SeedSequence:
        if isinstance(self.seed, np.random.SeedSequence):
            return self.seed
        return np.random.SeedSequence(self.seed)


class ClauseSystem(ABC):
    """Clauses over a joint assignment of domain indices.

    Subclasses provide per-clause values and the participation lists; the
    per-variable flags and the global test may be overridden for speed.
    """

    domain_sizes: Sequence[int]

    @abstractmethod
    def clause_values(self, assignment: np.ndarray) -> np.ndarray:
        """Boolean array with one entry per clause."""

    @abstractmethod
    def participation(self) -> Sequence[Sequence[int]]:
        """Clause ids each variable takes part in."""

    def variable_flags(self, assignment: np.ndarray) -> np.ndarray:
        values = self.clause_values(assignment)
        return np.array([bool(np.all(values[list(ks)])) for ks in self.participation()], dtype=bool)

    def all_satisfied(self, assignment: np.ndarray, flags: np.ndarray) -> bool:
        return bool(np.all(self.clause_values(assignment)))


@dataclass
class CflState:
    sizes: np.ndarray
    probs: np.ndarray  # (M, Dmax), zero padded
    assignment: np.ndarray | None = None
    iteration: int = 0

    def __post_init__(self) -> None:
        self.valid = (np.arange(self.probs.shape[1])[None, :] < self.sizes[:, None]).astype(float)

    @property
    def num_variables(self) -> int:
        return len(self.sizes)

    def distribution(self, m: int) -> np.ndarray:
        return self.probs[m, : self.sizes[m]]


@dataclass
class CflResult:
    assignment: np.ndarray | None
    iterations: int
    trace: list[tuple[int, int, bool]] = field(default_factory=list)
    history: list[np.ndarray] | None = None
    state: CflState | None = None

    @property
    def converged(self) -> bool:
        return self.assignment is not None


def cfl_init(domain_sizes: Sequence[int], params: CflParams | None = None) -> CflState:
    sizes = np.asarray(list(domain_sizes), dtype=np.int64)
    if np.any(sizes < 1):
        m = int(np.argmin(sizes))
        raise EmptyDomain(f"variable {m} has an empty domain")
    width = int(sizes.max()) if len(sizes) else 1
    probs = np.zeros((len(sizes), width))
    cols = np.arange(width)
    mask = cols[None, :] < sizes[:, None]
    probs[mask] = np.repeat(1.0 / sizes, sizes)
    return CflState(sizes=sizes, probs=probs)


def update_rule(dist: Sequence[float], satisfied: bool, chosen: int, a: float, b: float) -> np.ndarray:
    """One distribution update.

    Satisfied: all mass on ``chosen``. Unsatisfied: every entry becomes
    ``(1-b) q + b / (N - 1 + a/b)``, and ``chosen`` gets ``a`` instead of ``b``
    in the numerator. The result is renormalized.
    """
    q = np.asarray(dist, dtype=float)
    n = len(q)
    out = np.zeros(n)
    if satisfied:
        out[chosen] = 1.0
        return out
    denom = n - 1 + a / b
    out = (1.0 - b) * q + b / denom
    out[chosen] += (a - b) / denom
    return out / out.sum()


def _update_all(state: CflState, chosen: np.ndarray, flags: np.ndarray, a: float, b: float) -> None:
    probs, sizes = state.probs, state.sizes
    rows = np.arange(len(sizes))
    denom = sizes - 1 + a / b
    relaxed = (1.0 - b) * probs + (b / denom)[:, None] * state.valid
    relaxed[rows, chosen] += (a - b) / denom
    relaxed /= relaxed.sum(axis=1, keepdims=True)
    if flags.any():
        relaxed[flags] = 0.0
        relaxed[rows[flags], chosen[flags]] = 1.0
    state.probs = relaxed


class _Streams:
    """Per-variable uniform streams, drawn in blocks (same values as one-at-a-time draws)."""

    def __init__(self, n: int, seed: np.random.SeedSequence):
        self.gens = [np.random.Generator(np.random.PCG64(s)) for s in child_seeds(seed, n)]
        self.buf = np.empty((n, 0))
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos >= self.buf.shape[1]:
            self.buf = np.array([g.random(_BLOCK) for g in self.gens]).reshape(len(self.gens), _BLOCK)
            self.pos = 0
        col = self.buf[:, self.pos]
        self.pos += 1
        return col


def _draw(state: CflState, u: np.ndarray) -> np.ndarray:
    cums = np.cumsum(state.probs, axis=1)
    idx = (cums <= u[:, None]).sum(axis=1)
    return np.minimum(idx, state.sizes - 1)


def cfl_step(
    state: CflState, system: ClauseSystem, streams: _Streams, a: float, b: float
) -> tuple[np.ndarray, np.ndarray]:
    """Draw all variables, evaluate per-variable flags, update all distributions."""
    chosen = _draw(state, streams.next()) if state.num_variables else np.zeros(0, dtype=np.int64)
    flags = system.variable_flags(chosen)
    if state.num_variables:
        _update_all(state, chosen, flags, a, b)
    state.assignment = chosen
    state.iteration += 1
    return chosen, flags


def make_streams(state: CflState, params: CflParams) -> _Streams:
    return _Streams(state.num_variables, params.seed_sequence())


def cfl_run(
    state: CflState,
    system: ClauseSystem,
    params: CflParams,
    *,
    record_history: bool = False,
    on_iteration: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> CflResult:
    """Iterate until every clause holds or ``params.max_iterations`` is reached."""
    streams = make_streams(state, params)
    trace: list[tuple[int, int, bool]] = []
    history: list[np.ndarray] | None = [] if record_history else None
    for _ in range(params.max_iterations):
        chosen, flags = cfl_step(state, system, streams, params.a, params.b)
        done = system.all_satisfied(chosen, flags)
        trace.append((state.iteration, int(flags.sum()), done))
        if history is not None:
            history.append(chosen.copy())
        if on_iteration is not None:
            on_iteration(state.iteration, chosen, flags)
        if done:
            return CflResult(chosen.copy(), state.iteration, trace, history, state)
    return CflResult(None, state.iteration, trace, history, state)


def child_seeds(seed: int | np.random.SeedSequence, n: int) -> list[np.random.SeedSequence]:
    """The first ``n`` children ``SeedSequence.spawn`` would give, without mutating ``seed``."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [
        np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + (k,), pool_size=root.pool_size)
        for k in range(n)
    ]
