"""Station selection heuristics and the random-subset width study."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BeaconId, RadioMap, intersect_channels
from .engines import EngineConfig, knn_localize_batch
from .evaluation import nearest_rank

DEFAULT_TRIALS = 500


@dataclass(frozen=True)
class SubsetStudyResult:
    n_stations: int
    trials: int
    median_errors: tuple[float, ...]
    mean_of_medians: float
    min_of_medians: float
    max_of_medians: float

    @property
    def std_error(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(np.std(self.median_errors, ddof=1) / np.sqrt(self.trials))


def _check_n(n: int, available: int) -> None:
    if not 1 <= n <= available:
        raise ValueError(f"n must lie in [1, {available}], got {n}")


def _ranked_by_mean(rmap: RadioMap, strongest: bool) -> list[BeaconId]:
    means = rmap.matrix.mean(axis=0)
    keys = [(-m if strongest else m, b.sort_key) for m, b in zip(means, rmap.beacons)]
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    return [rmap.beacons[i] for i in order]


def select_strongest(rmap: RadioMap, n: int) -> list[BeaconId]:
    """The n beacons with the highest mean normalized RSSI, strongest first."""
    _check_n(n, len(rmap.beacons))
    return _ranked_by_mean(rmap, True)[:n]


def select_weakest(rmap: RadioMap, n: int) -> list[BeaconId]:
    _check_n(n, len(rmap.beacons))
    return _ranked_by_mean(rmap, False)[:n]


def localization_errors(train: RadioMap, test: RadioMap, config: EngineConfig) -> np.ndarray:
    est = knn_localize_batch(train, test, config)
    xy = np.array([[e.x, e.y] for e in est])
    return np.hypot(*(xy - test.coords).T)


def median_error(train: RadioMap, test: RadioMap, config: EngineConfig) -> float:
    return nearest_rank(np.sort(localization_errors(train, test, config)), 0.5)


def _common(train: RadioMap, test: RadioMap) -> tuple[RadioMap, RadioMap]:
    common = intersect_channels(train.beacons, test.beacons)
    if list(common) != list(train.beacons):
        train = train.project(common)
    if list(common) != list(test.beacons):
        test = test.project(common)
    return train, test


def _workers(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)
    try:
        return max(1, int(os.environ.get("AMBIENTLOC_THREADS", "1")))
    except ValueError:
        return 1


def random_subset_study(
    train: RadioMap,
    test: RadioMap,
    n: int,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    config: EngineConfig = EngineConfig(),
    workers: Optional[int] = None,
) -> SubsetStudyResult:
    """Median kNN error over `trials` random n-station subsets.

    Each trial draws its subset from its own child seed, so the result does
    not depend on how trials are scheduled across threads.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    train, test = _common(train, test)
    nb = len(train.beacons)
    _check_n(n, nb)
    children = np.random.SeedSequence(seed).spawn(trials)

    def one(child: np.random.SeedSequence) -> float:
        cols = np.sort(np.random.default_rng(child).choice(nb, n, replace=False))
        subset = [train.beacons[i] for i in cols]
        return median_error(train.project(subset), test.project(subset), config)

    w = _workers(workers)
    if w == 1:
        medians = [one(c) for c in children]
    else:
        with ThreadPoolExecutor(w) as pool:
            medians = list(pool.map(one, children))
    arr = np.asarray(medians)
    return SubsetStudyResult(n, trials, tuple(float(m) for m in medians),
                             float(arr.mean()), float(arr.min()), float(arr.max()))


def greedy_select(
    train: RadioMap,
    test: RadioMap,
    n: int,
    config: EngineConfig = EngineConfig(),
) -> list[BeaconId]:
    """Forward selection: repeatedly add the beacon giving the lowest held-out median error.

    Ties on the median fall back to mean error, then to the lowest channel.
    """
    train, test = _common(train, test)
    _check_n(n, len(train.beacons))
    chosen: list[BeaconId] = []
    remaining = list(train.beacons)
    while len(chosen) < n:
        best_key, best = None, None
        for b in remaining:
            subset = chosen + [b]
            errs = localization_errors(train.project(subset), test.project(subset), config)
            key = (nearest_rank(np.sort(errs), 0.5), float(errs.mean()), b.sort_key)
            if best_key is None or key < best_key:
                best_key, best = key, b
        chosen.append(best)
        remaining.remove(best)
    return chosen
