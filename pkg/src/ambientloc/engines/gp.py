"""Gaussian-process regression from fingerprints to x and y coordinates."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..core import Fingerprint, RadioMap
from .config import EngineConfig, LocalizationEstimate
from .knn import _query_matrix, transform_features


class GPConditioningError(RuntimeError):
    pass


def se_kernel(a: np.ndarray, b: np.ndarray, lengthscale: float, signal_variance: float) -> np.ndarray:
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0) / lengthscale**2)


def se_kernel_gradient(a: np.ndarray, b: np.ndarray, lengthscale: float, signal_variance: float) -> np.ndarray:
    """d k(a, b) / d a for single vectors a, b."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    k = signal_variance * np.exp(-0.5 * np.sum((a - b) ** 2) / lengthscale**2)
    return -k * (a - b) / lengthscale**2


@dataclass(frozen=True)
class GaussianProcess:
    X: np.ndarray
    prior_mean: float
    weights: np.ndarray          # K^-1 (y - m)
    chol: tuple                  # scipy cho_factor output
    lengthscale: float
    signal_variance: float
    noise_variance: float

    @classmethod
    def fit(cls, X, y, lengthscale: float, signal_variance: float, noise_variance: float) -> "GaussianProcess":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        if len(X) != len(y):
            raise ValueError("inputs and targets differ in length")
        if noise_variance <= 0:
            raise ValueError("noise variance must be positive")
        K = se_kernel(X, X, lengthscale, signal_variance) + noise_variance * np.eye(len(X))
        try:
            chol = cho_factor(K, lower=True)
        except LinAlgError as exc:
            cond = np.linalg.cond(K)
            raise GPConditioningError(f"kernel matrix not positive definite (condition number {cond:.3g})") from exc
        if not np.all(np.isfinite(chol[0])):
            raise GPConditioningError("kernel Cholesky factor is not finite")
        m = float(y.mean())
        return cls(X, m, cho_solve(chol, y - m), chol, lengthscale, signal_variance, noise_variance)

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        Ks = se_kernel(self.X, Xq, self.lengthscale, self.signal_variance)
        mean = self.prior_mean + Ks.T @ self.weights
        v = cho_solve(self.chol, Ks)
        var = np.maximum(self.signal_variance - np.sum(Ks * v, axis=0), 0.0)
        return mean, var

    def mean_gradient(self, xq) -> np.ndarray:
        xq = np.asarray(xq, dtype=float)
        grads = np.array([se_kernel_gradient(xq, xi, self.lengthscale, self.signal_variance) for xi in self.X])
        return self.weights @ grads

    def loo_residuals(self) -> np.ndarray:
        """Closed-form leave-one-out residuals y_i - mu_{-i}."""
        Kinv = cho_solve(self.chol, np.eye(len(self.X)))
        return self.weights / np.diag(Kinv)


@dataclass(frozen=True)
class GPModel:
    gp_x: GaussianProcess
    gp_y: GaussianProcess
    config: EngineConfig
    environment_id: str = "default"


def gp_train(rmap: RadioMap, config: EngineConfig = EngineConfig()) -> GPModel:
    if len(rmap) < 2:
        raise ValueError("GP training needs at least two locations")
    X = transform_features(rmap.matrix, config)
    params = (config.gp_lengthscale, config.gp_signal_variance, config.gp_noise_variance)
    return GPModel(
        GaussianProcess.fit(X, rmap.coords[:, 0], *params),
        GaussianProcess.fit(X, rmap.coords[:, 1], *params),
        config,
        rmap.environment_id,
    )


def gp_localize_batch(model: GPModel, queries: np.ndarray) -> list[LocalizationEstimate]:
    q = transform_features(np.atleast_2d(queries), model.config)
    mx, vx = model.gp_x.predict(q)
    my, vy = model.gp_y.predict(q)
    return [
        LocalizationEstimate(float(x), float(y), None, float(a + b), model.environment_id)
        for x, y, a, b in zip(mx, my, vx, vy)
    ]


def gp_localize(model: GPModel, query: Fingerprint | np.ndarray) -> LocalizationEstimate:
    values = query.values if isinstance(query, Fingerprint) else np.asarray(query, dtype=float)
    return gp_localize_batch(model, values[None, :])[0]


def gp_localize_map(model: GPModel, rmap: RadioMap, queries) -> list[LocalizationEstimate]:
    return gp_localize_batch(model, _query_matrix(rmap, queries))


def tune_gp_lengthscale(
    rmap: RadioMap,
    config: EngineConfig = EngineConfig(),
    grid: Optional[Iterable[float]] = None,
) -> EngineConfig:
    """Pick the lengthscale with the smallest mean leave-one-out position error."""
    grid = list(grid) if grid is not None else [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0]
    best, best_err = config, np.inf
    for ell in grid:
        cand = replace(config, gp_lengthscale=float(ell))
        try:
            model = gp_train(rmap, cand)
        except GPConditioningError:
            continue
        err = float(np.mean(np.hypot(model.gp_x.loo_residuals(), model.gp_y.loo_residuals())))
        if err < best_err:
            best, best_err = cand, err
    return best
