"""Fingerprint distances, similarities and the pairwise-ratio transform."""

from __future__ import annotations

import numpy as np

from ..core import Fingerprint


def _vec(f) -> np.ndarray:
    return f.values if isinstance(f, Fingerprint) else np.asarray(f, dtype=float)


def euclidean_distance(a, b) -> float:
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pearson_similarity(a, b) -> float:
    """Sample Pearson r; 0 when either vector is constant."""
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("correlation needs at least two entries")
    return float(pearson_matrix(a[None, :], b[None, :])[0, 0])


def pearson_matrix(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Pearson r between every row of `queries` and every row of `refs`."""
    q = queries - queries.mean(axis=1, keepdims=True)
    r = refs - refs.mean(axis=1, keepdims=True)
    qn = np.sqrt(np.sum(q * q, axis=1))
    rn = np.sqrt(np.sum(r * r, axis=1))
    num = q @ r.T
    den = np.outer(qn, rn)
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.clip(out, -1.0, 1.0)


def distance_matrix(queries: np.ndarray, refs: np.ndarray, chunk: int = 32) -> np.ndarray:
    out = np.empty((len(queries), len(refs)))
    for s in range(0, len(queries), chunk):
        diff = queries[s:s + chunk, None, :] - refs[None, :, :]
        out[s:s + chunk] = np.sqrt(np.einsum("qrk,qrk->qr", diff, diff))
    return out


def ratio_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def ratio_matrix(values: np.ndarray, epsilon: float = 1e-6, log: bool = False) -> np.ndarray:
    values = np.atleast_2d(values)
    n = values.shape[1]
    if n < 2:
        raise ValueError("ratio fingerprints need at least two beacons")
    i, j = ratio_pairs(n)
    out = (values[:, i] + epsilon) / (values[:, j] + epsilon)
    return np.log(out) if log else out


def ratio_transform(f, epsilon: float = 1e-6, log: bool = False) -> Fingerprint:
    """Hyperbolic fingerprint: (f_i + eps) / (f_j + eps) for i < j, lexicographic pairs."""
    loc = f.location if isinstance(f, Fingerprint) else None
    return Fingerprint(ratio_matrix(_vec(f), epsilon, log)[0], loc)
