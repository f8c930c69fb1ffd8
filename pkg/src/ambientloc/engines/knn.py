"""k-nearest-neighbour localization and the cross-device adapters built on it."""

from __future__ import annotations

import numpy as np

from ..core import Fingerprint, RadioMap
from .config import CrossDeviceMethod, EngineConfig, LocalizationEstimate, Metric, Transform
from .metrics import distance_matrix, pearson_matrix, ratio_matrix


def _query_matrix(rmap: RadioMap, queries) -> np.ndarray:
    if isinstance(queries, Fingerprint):
        q = queries.values[None, :]
    elif isinstance(queries, RadioMap):
        q = queries.matrix
    elif len(queries) and isinstance(queries[0], Fingerprint):
        q = np.array([f.values for f in queries])
    else:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
    if q.shape[1] != len(rmap.beacons):
        raise ValueError(f"query has {q.shape[1]} slots, map has {len(rmap.beacons)} beacons")
    return q


def transform_features(values: np.ndarray, config: EngineConfig) -> np.ndarray:
    if config.fingerprint_transform is Transform.RATIO:
        return ratio_matrix(values, config.ratio_epsilon, config.log_ratio)
    return values


def dissimilarity(rmap: RadioMap, queries, config: EngineConfig) -> np.ndarray:
    """(n_queries, n_map) matrix; smaller means closer. Correlation ranks by 1 - r."""
    q = transform_features(_query_matrix(rmap, queries), config)
    refs = transform_features(rmap.matrix, config)
    if config.metric is Metric.CORRELATION:
        return 1.0 - pearson_matrix(q, refs)
    return distance_matrix(q, refs)


def neighbour_order(scores: np.ndarray, grid_indices: np.ndarray) -> np.ndarray:
    """Per-row ordering by score, ties to the lowest grid_index."""
    out = np.empty(scores.shape, dtype=int)
    for r, row in enumerate(scores):
        out[r] = np.lexsort((grid_indices, row))
    return out


def knn_localize_batch(rmap: RadioMap, queries, config: EngineConfig) -> list[LocalizationEstimate]:
    if len(rmap) == 0:
        raise ValueError("radio map is empty")
    if config.k > len(rmap):
        raise ValueError(f"k={config.k} exceeds the {len(rmap)} calibration fingerprints")
    scores = dissimilarity(rmap, queries, config)
    order = neighbour_order(scores, rmap.grid_indices)[:, : config.k]
    out = []
    for r, idx in enumerate(order):
        x, y = rmap.coords[idx].mean(axis=0)
        matched = int(rmap.grid_indices[idx[0]]) if config.k == 1 else None
        out.append(LocalizationEstimate(float(x), float(y), matched, float(scores[r, idx[0]]), rmap.environment_id))
    return out


def knn_localize(rmap: RadioMap, query: Fingerprint, config: EngineConfig) -> LocalizationEstimate:
    return knn_localize_batch(rmap, query, config)[0]


def cross_device_localize(
    rmap: RadioMap,
    query: Fingerprint,
    method: CrossDeviceMethod | str,
    config: EngineConfig = EngineConfig(),
) -> LocalizationEstimate:
    return knn_localize(rmap, query, config.for_method(method))
