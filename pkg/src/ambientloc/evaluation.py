"""Error statistics and the train/test experiment pipeline."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import BeaconId, Location, RadioMap, RawScan, Technology, prepare_maps
from .engines import CrossDeviceMethod, Engine, EngineConfig, LocalizationEstimate, localize_all

ZERO_TOL = 1e-9


class ExperimentError(RuntimeError):
    def __init__(self, step: str, cause: Exception):
        super().__init__(f"{step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class ErrorStats:
    n: int
    classification_rate: float
    median: float
    p90: float
    p95: float
    cdf: tuple[tuple[float, float], ...]
    mean: float = 0.0
    snap_rate: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cdf"] = [list(p) for p in self.cdf]
        return d


def error_distance(estimate: LocalizationEstimate, truth: Location) -> float:
    if estimate.environment_id is not None and estimate.environment_id != truth.environment_id:
        raise ValueError(f"estimate from {estimate.environment_id!r}, truth from {truth.environment_id!r}")
    return math.hypot(estimate.x - truth.x, estimate.y - truth.y)


def nearest_rank(sorted_values: Sequence[float], p: float) -> float:
    """The ceil(p * n)-th order statistic (1-based)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(round(p * n, 9)))
    return float(sorted_values[rank - 1])


def compute_stats(errors: Sequence[float], snap_radius: Optional[float] = None) -> ErrorStats:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no errors to summarise")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be finite and non-negative")
    e = np.where(e <= ZERO_TOL, 0.0, e)
    s = np.sort(e)
    n = len(s)
    uniq, counts = np.unique(s, return_counts=True)
    cdf = tuple((float(u), float(c) / n) for u, c in zip(uniq, np.cumsum(counts)))
    return ErrorStats(
        n=n,
        classification_rate=float(np.count_nonzero(s == 0.0)) / n,
        median=nearest_rank(s, 0.5),
        p90=nearest_rank(s, 0.9),
        p95=nearest_rank(s, 0.95),
        cdf=cdf,
        mean=float(s.mean()),
        snap_rate=None if snap_radius is None else float(np.count_nonzero(s <= snap_radius)) / n,
    )


@dataclass(frozen=True)
class LocationRecord:
    grid_index: int
    true_x: float
    true_y: float
    est_x: float
    est_y: float
    error_m: float


@dataclass(frozen=True)
class ExperimentResult:
    stats: ErrorStats
    records: tuple[LocationRecord, ...]
    beacons: tuple[BeaconId, ...]
    label: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    train: Path | Sequence[RawScan]
    test: Path | Sequence[RawScan]
    technologies: tuple[Technology, ...] = (Technology.FM,)
    engine: EngineConfig = field(default_factory=EngineConfig)
    method: CrossDeviceMethod = CrossDeviceMethod.BASIC
    subset: Optional[dict] = None
    grid_spacing: Optional[float] = None


def dataset_environment_id(path: str | Path) -> str:
    """Environment id from a sibling environment.json, else a shared default."""
    sidecar = Path(path).parent / "environment.json"
    if sidecar.exists():
        return json.loads(sidecar.read_text()).get("environment_id", "dataset")
    return "dataset"


def _load(ref) -> list[RawScan]:
    if isinstance(ref, (str, Path)):
        from .formats import read_scans_csv

        return read_scans_csv(ref, environment_id=dataset_environment_id(ref))
    return list(ref)


def apply_subset(train: RadioMap, test: RadioMap, subset: dict, engine: EngineConfig) -> list[BeaconId]:
    """Resolve a subset request: {"beacons": [...]} or {"strategy": ..., "n": ..., "seed": ...}."""
    from . import selection

    if "beacons" in subset:
        return [BeaconId(Technology.parse(b["tech"]), b["channel"]) for b in subset["beacons"]]
    strategy, n = subset["strategy"], int(subset["n"])
    if strategy == "strongest":
        return selection.select_strongest(train, n)
    if strategy == "weakest":
        return selection.select_weakest(train, n)
    if strategy == "greedy":
        return selection.greedy_select(train, test, n, engine)
    if strategy == "random":
        rng = np.random.default_rng(int(subset.get("seed", 0)))
        idx = sorted(rng.choice(len(train.beacons), n, replace=False))
        return [train.beacons[i] for i in idx]
    raise ValueError(f"unknown subset strategy {strategy!r}")


def evaluate_maps(train: RadioMap, test: RadioMap, engine: EngineConfig,
                  snap_radius: Optional[float] = None) -> tuple[ErrorStats, tuple[LocationRecord, ...]]:
    estimates = localize_all(train, test, engine)
    records = []
    for fp, est in zip(test.fingerprints, estimates):
        records.append(LocationRecord(fp.location.grid_index, fp.location.x, fp.location.y,
                                      est.x, est.y, error_distance(est, fp.location)))
    stats = compute_stats([r.error_m for r in records], snap_radius)
    return stats, tuple(records)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """intersect channels -> build maps -> optional subset -> engine -> localize -> stats."""
    try:
        train_scans, test_scans = _load(config.train), _load(config.test)
    except Exception as exc:
        raise ExperimentError("load", exc) from exc
    envs = {s.location.environment_id for s in train_scans} | {s.location.environment_id for s in test_scans}
    if len(envs) > 1:
        raise ExperimentError("load", ValueError(f"train and test span environments {sorted(envs)}"))
    try:
        train, test = prepare_maps(train_scans, test_scans, config.technologies)
    except Exception as exc:
        raise ExperimentError("build maps", exc) from exc
    engine = config.engine
    if engine.engine is Engine.KNN:
        engine = engine.for_method(config.method)
    elif config.method is not CrossDeviceMethod.BASIC:
        raise ExperimentError("engine", ValueError("cross-device methods apply to the kNN engine only"))
    if config.subset:
        try:
            chosen = apply_subset(train, test, config.subset, engine)
            train, test = train.project(chosen), test.project(chosen)
        except Exception as exc:
            raise ExperimentError("subset", exc) from exc
    snap = None
    if engine.engine is Engine.GP:
        snap = 0.5 * (config.grid_spacing or _grid_spacing(train))
    try:
        stats, records = evaluate_maps(train, test, engine, snap)
    except Exception as exc:
        raise ExperimentError("localize", exc) from exc
    label = "+".join(t.value for t in config.technologies)
    return ExperimentResult(stats, records, train.beacons, label)


def _grid_spacing(rmap: RadioMap) -> float:
    c = rmap.coords
    if len(c) < 2:
        return 1.0
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    d[d == 0] = np.inf
    return float(np.min(d))
