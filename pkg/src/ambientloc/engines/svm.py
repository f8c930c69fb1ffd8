"""Soft-margin SVM classification over grid locations.

Binary problems are solved in the dual with SMO (maximal-violating-pair
selection with second-order choice of the partner); multi-class uses
one-vs-one voting.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from ..core import Fingerprint, RadioMap
from .config import EngineConfig, Kernel, LocalizationEstimate
from .knn import _query_matrix, transform_features

TAU = 1e-12
TIE_TOL = 1e-9


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: Kernel, gamma: float) -> np.ndarray:
    if kernel is Kernel.LINEAR:
        return a @ b.T
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-8, max_iter: int = 100_000):
    """Return (alpha, rho) for the dual soft-margin problem with labels in {-1, +1}."""
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    for _ in range(max_iter):
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        gmax = score[i]
        if gmax - score[low].min() < tol:
            break
        cand = np.flatnonzero(low & (score < gmax))
        b = gmax - score[cand]
        a = QD[i] + QD[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, TAU)
        j = int(cand[np.argmin(-(b * b) / a)])

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
                elif alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            else:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, total
                elif alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, total
        G += Q[:, i] * (alpha[i] - ai) + Q[:, j] * (alpha[j] - aj)

    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub, lb = np.inf, -np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] >= C) or (y[t] < 0 and alpha[t] <= 0):
                lb = max(lb, yG[t])
            else:
                ub = min(ub, yG[t])
        rho = float((ub + lb) / 2)
    return alpha, rho


@dataclass(frozen=True)
class BinarySVM:
    support: np.ndarray      # indices into the training matrix
    coef: np.ndarray         # alpha_i * y_i for the support vectors
    rho: float

    def decision(self, K_cols: np.ndarray) -> np.ndarray:
        """K_cols: kernel values (n_train, n_queries)."""
        return self.coef @ K_cols[self.support] - self.rho

    def linear_weights(self, X: np.ndarray) -> np.ndarray:
        return self.coef @ X[self.support]


@dataclass(frozen=True)
class SVMModel:
    X: np.ndarray
    classes: tuple[int, ...]
    coords: Mapping[int, tuple[float, float]]
    machines: Mapping[tuple[int, int], BinarySVM]
    config: EngineConfig
    environment_id: str = "default"

    def decision_values(self, queries: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
        K = kernel_matrix(self.X, queries, self.config.svm_kernel, self.config.svm_gamma)
        return {pair: m.decision(K) for pair, m in self.machines.items()}

    def predict(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        votes = np.zeros((len(queries), len(self.classes)), dtype=int)
        pos = {c: i for i, c in enumerate(self.classes)}
        for (a, b), f in self.decision_values(queries).items():
            first = f >= -TIE_TOL
            votes[first, pos[a]] += 1
            votes[~first, pos[b]] += 1
        # argmax returns the first maximum, i.e. the lowest class label
        win = np.argmax(votes, axis=1)
        return np.asarray(self.classes)[win], votes[np.arange(len(queries)), win]


def fit_svm(
    X: np.ndarray,
    labels: Sequence[int],
    config: EngineConfig,
    coords: Mapping[int, tuple[float, float]] | None = None,
    environment_id: str = "default",
) -> SVMModel:
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise ValueError("SVM training needs at least two distinct locations")
    K = kernel_matrix(X, X, config.svm_kernel, config.svm_gamma)
    machines = {}
    for a, b in combinations(classes, 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        alpha, rho = smo_solve(K[np.ix_(idx, idx)], y, config.svm_c)
        sv = alpha > 0
        machines[(a, b)] = BinarySVM(idx[sv], (alpha * y)[sv], rho)
    coords = dict(coords) if coords is not None else {c: (float("nan"), float("nan")) for c in classes}
    return SVMModel(X, classes, coords, machines, config, environment_id)


def svm_train(rmap: RadioMap, config: EngineConfig = EngineConfig()) -> SVMModel:
    X = transform_features(rmap.matrix, config)
    coords = {int(g): (float(x), float(y)) for g, (x, y) in zip(rmap.grid_indices, rmap.coords)}
    model = fit_svm(X, rmap.grid_indices, config, coords, rmap.environment_id)
    return model


def svm_localize_batch(model: SVMModel, queries: np.ndarray) -> list[LocalizationEstimate]:
    q = transform_features(np.atleast_2d(queries), model.config)
    labels, votes = model.predict(q)
    out = []
    for g, v in zip(labels, votes):
        x, y = model.coords[int(g)]
        out.append(LocalizationEstimate(x, y, int(g), float(v), model.environment_id))
    return out


def svm_localize(model: SVMModel, query: Fingerprint | np.ndarray) -> LocalizationEstimate:
    values = query.values if isinstance(query, Fingerprint) else np.asarray(query, dtype=float)
    return svm_localize_batch(model, values[None, :])[0]


def svm_localize_map(model: SVMModel, rmap: RadioMap, queries) -> list[LocalizationEstimate]:
    return svm_localize_batch(model, _query_matrix(rmap, queries))
