"""Calibration-side domain types: beacons, scans, normalization and radio maps."""

from __future__ import annotations

import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# a complete FM scan carries this many samples per channel
EXPECTED_SAMPLES = 10


class Technology(str, enum.Enum):
    FM = "fm"
    WIFI = "wifi"
    GSM = "gsm"

    @property
    def rank(self) -> int:
        return _TECH_ORDER[self]

    @classmethod
    def parse(cls, value: "str | Technology") -> "Technology":
        if isinstance(value, Technology):
            return value
        key = str(value).strip().lower().replace("-", "")
        for tech in cls:
            if tech.value == key:
                return tech
        raise ValueError(f"unknown technology {value!r}")


_TECH_ORDER = {Technology.FM: 0, Technology.WIFI: 1, Technology.GSM: 2}


class NoCommonChannelsError(ValueError):
    """Training and test data share no beacon; localization is impossible."""


class DegenerateRangeError(ValueError):
    pass


@dataclass(frozen=True)
class BeaconId:
    technology: Technology
    channel: int
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "technology", Technology.parse(self.technology))
        if int(self.channel) != self.channel or self.channel <= 0:
            raise ValueError(f"beacon channel must be a positive integer, got {self.channel}")
        object.__setattr__(self, "channel", int(self.channel))

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.technology.rank, self.channel)

    def __str__(self) -> str:
        return f"{self.technology.value.upper()}:{self.channel}"


def sort_beacons(beacons: Iterable[BeaconId]) -> list[BeaconId]:
    return sorted(set(beacons), key=lambda b: b.sort_key)


@dataclass(frozen=True)
class Location:
    x: float
    y: float
    environment_id: str = "default"
    grid_index: int = 0

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class RawScan:
    location: Location
    device_id: str
    session_id: str
    readings: Mapping[BeaconId, tuple[float, ...]]
    timestamp: float = 0.0

    def __post_init__(self):
        for beacon, samples in self.readings.items():
            if len(samples) == 0:
                raise ValueError(f"empty sample list for {beacon} at grid {self.location.grid_index}")


@dataclass(frozen=True)
class NormalizationParams:
    """Per-technology dBm range mapped affinely onto [0, 1]."""

    ranges: Mapping[Technology, tuple[float, float]]

    def __post_init__(self):
        fixed = {}
        for tech, (lo, hi) in self.ranges.items():
            if not hi > lo:
                raise DegenerateRangeError(f"{Technology.parse(tech).value}: max {hi} must exceed min {lo}")
            fixed[Technology.parse(tech)] = (float(lo), float(hi))
        object.__setattr__(self, "ranges", fixed)

    def _range(self, tech: Technology) -> tuple[float, float]:
        try:
            return self.ranges[Technology.parse(tech)]
        except KeyError:
            raise KeyError(f"no normalization range for {tech}") from None

    def normalize(self, tech: Technology, rssi):
        lo, hi = self._range(tech)
        return np.clip((np.asarray(rssi, dtype=float) - lo) / (hi - lo), 0.0, 1.0)

    def denormalize(self, tech: Technology, value):
        lo, hi = self._range(tech)
        return lo + np.asarray(value, dtype=float) * (hi - lo)


@dataclass(frozen=True)
class Fingerprint:
    """Per-beacon values aligned to a beacon index.

    Normalized fingerprints live in [0, 1] with invisible beacons at 0;
    transformed fingerprints (e.g. pairwise ratios) reuse this type.
    """

    values: np.ndarray
    location: Optional[Location] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("fingerprint values must be a 1-D vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class RadioMap:
    beacons: tuple[BeaconId, ...]
    fingerprints: tuple[Fingerprint, ...]
    norm: NormalizationParams
    environment_id: str = "default"
    device_id: str = ""
    session_id: str = ""
    skipped_readings: int = 0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "beacons", tuple(self.beacons))
        object.__setattr__(self, "fingerprints", tuple(self.fingerprints))
        seen = set()
        for fp in self.fingerprints:
            if len(fp) != len(self.beacons):
                raise ValueError("fingerprint length does not match the beacon index")
            if fp.location is None:
                raise ValueError("radio-map fingerprints need a location")
            if fp.location.grid_index in seen:
                raise ValueError(f"duplicate grid_index {fp.location.grid_index}")
            seen.add(fp.location.grid_index)

    def __len__(self) -> int:
        return len(self.fingerprints)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.array([fp.values for fp in self.fingerprints], dtype=float).reshape(len(self), len(self.beacons))
        m.setflags(write=False)
        return m

    @cached_property
    def coords(self) -> np.ndarray:
        return np.array([[fp.location.x, fp.location.y] for fp in self.fingerprints], dtype=float).reshape(-1, 2)

    @cached_property
    def grid_indices(self) -> np.ndarray:
        return np.array([fp.location.grid_index for fp in self.fingerprints], dtype=int)

    @property
    def locations(self) -> list[Location]:
        return [fp.location for fp in self.fingerprints]

    def project(self, beacons: Sequence[BeaconId]) -> "RadioMap":
        """Restrict the map to a subset of its beacons (kept in index order)."""
        index = {b: i for i, b in enumerate(self.beacons)}
        missing = [b for b in beacons if b not in index]
        if missing:
            raise KeyError(f"beacons not in map: {', '.join(map(str, missing))}")
        chosen = sort_beacons(beacons)
        cols = [index[b] for b in chosen]
        fps = tuple(Fingerprint(fp.values[cols], fp.location) for fp in self.fingerprints)
        return replace(self, beacons=tuple(chosen), fingerprints=fps)


def intersect_channels(train_beacons: Sequence[BeaconId], test_beacons: Sequence[BeaconId]) -> list[BeaconId]:
    if not train_beacons or not test_beacons:
        raise ValueError("both beacon lists must be non-empty")
    common = set(train_beacons) & set(test_beacons)
    if not common:
        raise NoCommonChannelsError("no channels common to training and test data")
    # keep labels from the training side
    labelled = {b: b for b in train_beacons}
    return sort_beacons(labelled[b] for b in common)


def scan_beacons(scans: Iterable[RawScan]) -> list[BeaconId]:
    return sort_beacons(b for s in scans for b in s.readings)


def fit_normalization(scans: Sequence[RawScan]) -> NormalizationParams:
    if not scans:
        raise ValueError("cannot fit normalization on zero scans")
    lo: dict[Technology, float] = {}
    hi: dict[Technology, float] = {}
    for scan in scans:
        for beacon, samples in scan.readings.items():
            t = beacon.technology
            lo[t] = min(lo.get(t, math.inf), min(samples))
            hi[t] = max(hi.get(t, -math.inf), max(samples))
    for t in lo:
        if hi[t] == lo[t]:
            raise DegenerateRangeError(f"constant RSSI ({lo[t]} dBm) for {t.value}; cannot normalize")
    return NormalizationParams({t: (lo[t], hi[t]) for t in lo})


def filter_technologies(scans: Iterable[RawScan], technologies: Iterable[Technology]) -> list[RawScan]:
    wanted = {Technology.parse(t) for t in technologies}
    out = []
    for s in scans:
        readings = {b: v for b, v in s.readings.items() if b.technology in wanted}
        if readings:
            out.append(replace(s, readings=readings))
    return out


def build_radio_map(
    scans: Sequence[RawScan],
    beacons: Sequence[BeaconId],
    norm: NormalizationParams,
) -> RadioMap:
    """Average normalized samples into one fingerprint per grid location.

    Beacons never observed at a location read 0. Readings for beacons outside
    the index are skipped and counted.
    """
    if not beacons:
        raise ValueError("beacon index is empty")
    index = {b: i for i, b in enumerate(beacons)}
    if len(index) != len(beacons):
        raise ValueError("beacon index contains duplicates")
    envs = {s.location.environment_id for s in scans}
    if len(envs) > 1:
        raise ValueError(f"scans span several environments: {sorted(envs)}")

    skipped = 0
    notes: list[str] = []
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, np.ndarray] = {}
    where: dict[int, Location] = {}
    meta = defaultdict(set)
    for scan in scans:
        loc = scan.location
        g = loc.grid_index
        if g in where and (where[g].x, where[g].y) != (loc.x, loc.y):
            raise ValueError(f"grid_index {g} recorded at two different coordinates")
        usable = False
        for beacon, samples in scan.readings.items():
            i = index.get(beacon)
            if i is None:
                skipped += len(samples)
                continue
            if g not in sums:
                sums[g] = np.zeros(len(beacons))
                counts[g] = np.zeros(len(beacons))
                where[g] = loc
            vals = norm.normalize(beacon.technology, np.asarray(samples, dtype=float))
            sums[g][i] += vals.sum()
            counts[g][i] += len(samples)
            usable = True
        if usable:
            meta["device"].add(scan.device_id)
            meta["session"].add(scan.session_id)

    if not sums:
        raise ValueError("no usable scans for the given beacon index")
    if skipped:
        logger.warning("ignored %d samples from beacons outside the index", skipped)

    fps = []
    for g in sorted(sums):
        c = counts[g]
        values = np.divide(sums[g], c, out=np.zeros_like(c), where=c > 0)
        short = int(np.count_nonzero((c > 0) & (c < EXPECTED_SAMPLES)))
        if short:
            notes.append(f"grid {g}: {short} beacon(s) with fewer than {EXPECTED_SAMPLES} samples")
        fps.append(Fingerprint(values, where[g]))

    seen: dict[bytes, int] = {}
    for fp in fps:
        key = fp.values.tobytes()
        if key in seen:
            notes.append(f"grid {fp.location.grid_index}: fingerprint identical to grid {seen[key]} (ambiguous)")
        else:
            seen[key] = fp.location.grid_index

    return RadioMap(
        beacons=tuple(beacons),
        fingerprints=tuple(fps),
        norm=norm,
        environment_id=envs.pop() if envs else "default",
        device_id=",".join(sorted(meta["device"])),
        session_id=",".join(sorted(meta["session"])),
        skipped_readings=skipped,
        warnings=tuple(notes),
    )


def prepare_maps(
    train_scans: Sequence[RawScan],
    test_scans: Sequence[RawScan],
    technologies: Optional[Iterable[Technology]] = None,
) -> tuple[RadioMap, RadioMap]:
    """Training map and query map over the common channels, normalized on training data."""
    if technologies is not None:
        technologies = list(technologies)
        train_scans = filter_technologies(train_scans, technologies)
        test_scans = filter_technologies(test_scans, technologies)
    beacons = intersect_channels(scan_beacons(train_scans), scan_beacons(test_scans))
    norm = fit_normalization(filter_to(train_scans, beacons))
    return build_radio_map(train_scans, beacons, norm), build_radio_map(test_scans, beacons, norm)


def filter_to(scans: Iterable[RawScan], beacons: Iterable[BeaconId]) -> list[RawScan]:
    keep = set(beacons)
    out = []
    for s in scans:
        readings = {b: v for b, v in s.readings.items() if b in keep}
        if readings:
            out.append(replace(s, readings=readings))
    return out
