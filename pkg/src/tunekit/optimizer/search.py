"""Suggestion rules over the unit cube: random search, GP expected improvement, and coordinate strategies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .acquisition import expected_improvement
from .gp import gp_fit, gp_select_hypers

WARMUP = 5
N_UNIFORM = 512
N_LOCAL = 64
LOCAL_STD = 0.1
DEFAULT_SLICE = 10

ALL_AT_ONCE = "all_at_once"
ONE_AT_A_TIME = "one_at_a_time"


def _embed(base: np.ndarray | None, dim: int, free: Sequence[int] | None, draws: np.ndarray) -> np.ndarray:
    if free is None:
        return draws
    out = np.tile(np.asarray(base, dtype=float), (draws.shape[0], 1))
    out[:, list(free)] = draws
    return out


def rs_suggest(dim: int, rng: np.random.Generator, base=None, free: Sequence[int] | None = None) -> np.ndarray:
    """Uniform point on the unit cube; with ``free`` given only those coordinates move off ``base``."""
    k = dim if free is None else len(free)
    return _embed(base, dim, free, rng.random((1, k)))[0]


@dataclass
class Suggestion:
    u: np.ndarray
    candidates: np.ndarray | None = None
    ei: np.ndarray | None = None
    hypers: tuple[float, float, float] | None = None


def bo_propose(
    dim: int, X, y, rng: np.random.Generator, base=None, free: Sequence[int] | None = None
) -> Suggestion:
    """Like :func:`bo_suggest` but also returns the scored candidate set."""
    X = np.asarray(X, dtype=float).reshape(-1, dim)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < WARMUP:
        return Suggestion(rs_suggest(dim, rng, base, free))
    hypers = gp_select_hypers(X, y)
    model = gp_fit(X, y, *hypers)
    best = int(np.argmin(y))
    incumbent = X[best]
    k = dim if free is None else len(free)
    cols = list(range(dim)) if free is None else list(free)
    uniform = _embed(base, dim, free, rng.random((N_UNIFORM, k)))
    local = np.clip(incumbent[cols] + LOCAL_STD * rng.standard_normal((N_LOCAL, k)), 0.0, 1.0)
    local = _embed(incumbent if free is not None else None, dim, free, local)
    candidates = np.vstack([uniform, local])
    ei = expected_improvement(model, candidates, float(y[best]))
    return Suggestion(candidates[int(np.argmax(ei))].copy(), candidates, ei, hypers)


def bo_suggest(dim: int, X, y, rng: np.random.Generator, base=None, free: Sequence[int] | None = None) -> np.ndarray:
    """Expected-improvement maximizer over 512 uniform and 64 incumbent-local candidates.

    Falls back to :func:`rs_suggest` while fewer than five observations exist.
    """
    return bo_propose(dim, X, y, rng, base, free).u


@dataclass
class Strategy:
    mode: str = ALL_AT_ONCE
    slice: int = DEFAULT_SLICE
    issued: int = 0
    anchor: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.mode not in (ALL_AT_ONCE, ONE_AT_A_TIME):
            raise ValueError(f"unknown strategy {self.mode!r}")
        if self.slice < 1:
            raise ValueError("slice must be >= 1")

    def cursor(self, dim: int) -> int:
        return (self.issued // self.slice) % dim


def strategy_next(strategy: Strategy, kind: str, dim: int, X, y, rng: np.random.Generator) -> np.ndarray:
    """Next point under ``strategy``; one_at_a_time moves only the cursor coordinate off the incumbent."""
    X = np.asarray(X, dtype=float).reshape(-1, dim)
    y = np.asarray(y, dtype=float).ravel()
    suggest = {"rs": _rs, "bo": bo_suggest}[kind]
    if strategy.mode == ALL_AT_ONCE:
        u = suggest(dim, X, y, rng)
    else:
        if len(y):
            base = X[int(np.argmin(y))]
        elif strategy.anchor is not None:
            base = np.asarray(strategy.anchor, dtype=float)
        else:
            base = np.full(dim, 0.5)
        u = suggest(dim, X, y, rng, base=base, free=[strategy.cursor(dim)])
    strategy.issued += 1
    return u


def _rs(dim, X, y, rng, base=None, free=None):
    return rs_suggest(dim, rng, base, free)


@dataclass
class Optimizer:
    """Stateless-per-step suggestion source: step ``n`` draws from a generator seeded by ``(seed, n)``.

    The suggestion sequence is therefore a pure function of the seed and the
    observations fed back, which is what makes store replay exact.
    """

    kind: str
    dim: int
    seed: int
    strategy: Strategy = field(default_factory=Strategy)
    X: list = field(default_factory=list)
    y: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in ("rs", "bo"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")

    def rng_for(self, step: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, step])

    def suggest(self) -> np.ndarray:
        self.strategy.issued = len(self.y)
        return strategy_next(self.strategy, self.kind, self.dim, self.X, self.y, self.rng_for(len(self.y)))

    def observe(self, u, value: float) -> None:
        if not np.isfinite(value):
            raise ValueError("objective value must be finite")
        self.X.append(np.asarray(u, dtype=float))
        self.y.append(float(value))

    @property
    def best(self) -> tuple[np.ndarray, float] | None:
        if not self.y:
            return None
        i = int(np.argmin(self.y))
        return self.X[i], self.y[i]
