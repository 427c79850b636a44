from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .gp import GpModel

XI = 0.01
SIGMA_FLOOR = 1e-12


def ei_closed_form(mu, sigma, f_best: float, xi: float = XI) -> np.ndarray:
    """Expected improvement below ``f_best`` (minimization) with exploration margin ``xi``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gain = f_best - mu - xi
    safe = np.where(sigma < SIGMA_FLOOR, 1.0, sigma)
    z = gain / safe
    ei = gain * norm.cdf(z) + safe * norm.pdf(z)
    ei = np.where(sigma < SIGMA_FLOOR, np.maximum(0.0, gain), ei)
    return np.maximum(ei, 0.0)


def expected_improvement(model: GpModel, x, f_best: float, xi: float = XI) -> np.ndarray:
    """EI of the fitted model at points ``x``.

    Evaluated in the model's standardized target units so the posterior mean
    and variance share one scale; ``f_best`` is given in target units.
    """
    mu, var = model.predict_standardized(x)
    f_best_std = (f_best - model.y_mean) / model.y_scale
    return ei_closed_form(mu, np.sqrt(var), f_best_std, xi)
