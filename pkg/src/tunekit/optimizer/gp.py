"""Gaussian-process surrogate with an isotropic Matern 3/2 kernel on the unit cube."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

LENGTHSCALES = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)
SIGNAL_VARIANCES = (0.5, 1.0, 2.0)
NOISE_VARIANCES = (1e-6, 1e-4, 1e-2)

JITTER_START = 1e-10
JITTER_MAX = 1e-4

SQRT3 = math.sqrt(3.0)


class GpFitError(RuntimeError):
    pass


def pairwise_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def matern32(A: np.ndarray, B: np.ndarray, lengthscale: float, signal_var: float) -> np.ndarray:
    s = SQRT3 * pairwise_distances(np.atleast_2d(A), np.atleast_2d(B)) / lengthscale
    return signal_var * (1.0 + s) * np.exp(-s)


def standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(y))
    scale = float(np.std(y))
    if scale == 0.0:
        scale = 1.0
    return (y - mean) / scale, mean, scale


def cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K``, adding escalating diagonal jitter if needed."""
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(K.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GpFitError("covariance matrix not positive definite even with 1e-4 jitter")


@dataclass
class FloorCounter:
    events: int = 0


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray
    y_std: np.ndarray
    y_mean: float
    y_scale: float
    lengthscale: float
    signal_var: float
    noise_var: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    floors: FloorCounter = field(default_factory=FloorCounter, compare=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return matern32(A, B, self.lengthscale, self.signal_var)

    def predict_standardized(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Ks = self.kernel(x, self.X)
        mu = Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = self.signal_var - np.sum(v * v, axis=0)
        negative = var < 0
        if negative.any():
            self.floors.events += int(negative.sum())
            var = np.where(negative, 0.0, var)
        return mu, var

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean in target units and posterior variance in standardized units."""
        mu, var = self.predict_standardized(x)
        return self.y_mean + self.y_scale * mu, var


def gp_fit(X, y, lengthscale: float, signal_var: float, noise_var: float) -> GpModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError("need at least one observation with matching X and y")
    if min(lengthscale, signal_var, noise_var) <= 0:
        raise ValueError("hyperparameters must be positive")
    if not np.all(np.isfinite(y)):
        raise GpFitError("non-finite targets")
    y_std, mean, scale = standardize(y)
    K = matern32(X, X, lengthscale, signal_var) + noise_var * np.eye(X.shape[0])
    L, jitter = cholesky_with_jitter(K)
    alpha = cho_solve((L, True), y_std, check_finite=False)
    return GpModel(X, y_std, mean, scale, lengthscale, signal_var, noise_var, L, alpha, jitter)


def log_marginal_likelihood(model: GpModel) -> float:
    n = model.n
    return float(
        -0.5 * model.y_std @ model.alpha - np.sum(np.log(np.diag(model.chol))) - 0.5 * n * math.log(2 * math.pi)
    )


def gp_select_hypers(X, y) -> tuple[float, float, float]:
    """Grid search over (lengthscale, signal variance, noise variance) maximizing the marginal likelihood.

    The first grid point in lexicographic order wins ties.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("hyperparameter selection needs at least two observations")
    best, best_lml = None, -math.inf
    for hypers in itertools.product(LENGTHSCALES, SIGNAL_VARIANCES, NOISE_VARIANCES):
        try:
            lml = log_marginal_likelihood(gp_fit(X, y, *hypers))
        except GpFitError:
            continue
        if lml > best_lml:
            best, best_lml = hypers, lml
    if best is None:
        raise GpFitError("no grid point produced a factorizable covariance")
    return best
