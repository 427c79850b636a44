"""Closed-form objectives on the unit cube, for exercising the tuning loop without a real benchmark."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

JAGGED_FREQS = (3, 5, 11, 13, 17)


def quadratic(u: Sequence[float], target: float = 0.7) -> float:
    return float(sum((x - target) ** 2 for x in u))


def separable(u: Sequence[float]) -> float:
    return float(sum(x * x for x in u))


def jagged(u: Sequence[float]) -> float:
    """Sum of sinusoids, meant to be maximized; many local optima."""
    total = 2.0
    for i, x in enumerate(u):
        total += 0.5 * math.sin(2 * math.pi * JAGGED_FREQS[i % len(JAGGED_FREQS)] * x)
    total += 0.25 * math.sin(2 * math.pi * 7 * sum(u))
    return total


FUNCTIONS = {"quadratic": quadratic, "separable": separable, "jagged": jagged}


def evaluate(name: str, u: Sequence[float], **kwargs) -> float:
    try:
        fn = FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown synthetic function {name!r}") from None
    return fn(np.asarray(u, dtype=float).tolist(), **kwargs)


def grid_optimum(name: str, dim: int, points: int = 401, maximize: bool = False) -> tuple[np.ndarray, float]:
    """Exhaustive grid search; the reference against which optimizers are judged."""
    axes = [np.linspace(0.0, 1.0, points)] * dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    values = np.array([evaluate(name, row) for row in mesh])
    i = int(np.argmax(values) if maximize else np.argmin(values))
    return mesh[i], float(values[i])
