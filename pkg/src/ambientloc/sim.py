"""Synthetic RF environments for FM, Wi-Fi and GSM fingerprinting.

Received power at a point is transmit power minus free-space path loss,
minus a spatially correlated log-normal shadowing term, plus a multipath
fading term built from a sum of plane waves at the beacon's wavelength.
Fading therefore varies on the wavelength scale (~3 m for FM, ~0.12 m for
Wi-Fi) while path loss varies on the transmitter-distance scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import BeaconId, Location, RawScan, Technology
from .seeding import derive_seed, rng_for

SPEED_OF_LIGHT = 299_792_458.0
SHADOWING_FEATURES = 64

FM_BAND_HZ = (87.5e6, 108.0e6)
WIFI_HZ = 2.437e9
GSM_HZ = 900e6

# receiver floor; weaker samples are not reported
DEFAULT_SENSITIVITY = {Technology.FM: -110.0, Technology.WIFI: -95.0, Technology.GSM: -110.0}


@dataclass(frozen=True)
class SimBeacon:
    id: BeaconId
    position: tuple[float, float]
    tx_power: float
    wavelength: float
    multipath_components: int = 32
    rician_k: float = 0.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.rician_k < 0:
            raise ValueError("rician_k must be non-negative")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class GridSpec:
    """Measurement points: interior rectangular grid, rectangle perimeter walk, or explicit points."""

    kind: str = "rect"
    spacing: float = 1.0
    points: tuple[tuple[float, float], ...] = ()

    def locations(self, width: float, height: float) -> list[tuple[float, float]]:
        if self.kind == "points":
            pts = [(float(x), float(y)) for x, y in self.points]
        elif self.kind == "rect":
            nx = int(math.ceil(width / self.spacing - 1e-9)) - 1
            ny = int(math.ceil(height / self.spacing - 1e-9)) - 1
            pts = [(i * self.spacing, j * self.spacing) for j in range(1, ny + 1) for i in range(1, nx + 1)]
        elif self.kind == "perimeter":
            pts = perimeter_points(width, height, self.spacing)
        else:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        return pts


def perimeter_points(width: float, height: float, spacing: float) -> list[tuple[float, float]]:
    """Points every `spacing` metres along the rectangle boundary, starting at the origin corner."""
    total = 2 * (width + height)
    n = int(math.floor(total / spacing + 1e-9))
    if n * spacing >= total - 1e-9:
        n -= 1
    out = []
    for i in range(n + 1):
        s = i * spacing
        if s <= width:
            out.append((s, 0.0))
        elif s <= width + height:
            out.append((width, s - width))
        elif s <= 2 * width + height:
            out.append((width - (s - width - height), height))
        else:
            out.append((0.0, height - (s - 2 * width - height)))
    return [(round(x, 9), round(y, 9)) for x, y in out]


@dataclass(frozen=True)
class Environment:
    width: float
    height: float
    beacons: tuple[SimBeacon, ...]
    seed: int = 0
    shadowing_sigma: float = 4.0
    shadowing_correlation_distance: float = 5.0
    environment_id: str = "custom"
    grid: GridSpec = field(default_factory=GridSpec)
    fading: bool = True
    shadowing_common: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("environment width and height must be positive")
        if self.shadowing_sigma < 0 or self.shadowing_correlation_distance <= 0:
            raise ValueError("invalid shadowing parameters")
        if not 0.0 <= self.shadowing_common <= 1.0:
            raise ValueError("shadowing_common must lie in [0, 1]")
        object.__setattr__(self, "beacons", tuple(self.beacons))
        ids = [b.id for b in self.beacons]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate beacon ids in environment")

    def beacon(self, beacon_id: BeaconId) -> SimBeacon:
        for b in self.beacons:
            if b.id == beacon_id:
                return b
        raise KeyError(str(beacon_id))

    def without_variation(self) -> "Environment":
        return replace(self, fading=False, shadowing_sigma=0.0)


@dataclass(frozen=True)
class DeviceProfile:
    device_id: str = "reference"
    gain: float = 1.0
    offset: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("device gain must be positive")
        if self.noise_sigma < 0:
            raise ValueError("device noise must be non-negative")


REFERENCE_DEVICE = DeviceProfile("reference", 1.0, 0.0, 1.0)


def path_loss_db(distance, reference_distance: float = 1.0):
    """Free-space loss relative to the reference distance: 20 log10(d / d0)."""
    d = np.asarray(distance, dtype=float)
    if reference_distance <= 0 or np.any(d <= 0):
        raise ValueError("distances must be positive")
    out = 20.0 * np.log10(d / reference_distance)
    return float(out) if out.ndim == 0 else out


def _points(location) -> tuple[np.ndarray, bool]:
    pts = np.asarray(location, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
        raise ValueError("locations must be finite (x, y) pairs")
    return pts, single


def _beacon_key(beacon: SimBeacon) -> tuple[str, int]:
    return (beacon.id.technology.value, beacon.id.channel)


def multipath_parameters(seed: int, beacon: SimBeacon) -> tuple[np.ndarray, np.ndarray, float]:
    """Arrival angles and phases of the scattered waves, plus the line-of-sight phase."""
    if beacon.multipath_components < 1:
        raise ValueError("multipath_components must be at least 1")
    rng = rng_for(seed, "fading", *_beacon_key(beacon))
    n = beacon.multipath_components
    angles = rng.uniform(0.0, 2 * np.pi, n)
    phases = rng.uniform(0.0, 2 * np.pi, n)
    return angles, phases, float(rng.uniform(0.0, 2 * np.pi))


def fading_gain(env: Environment, beacon: SimBeacon, location, phase_offsets: Optional[np.ndarray] = None):
    """Complex multipath gain with unit mean power; Rician when rician_k > 0."""
    pts, single = _points(location)
    angles, phases, los_phase = multipath_parameters(env.seed, beacon)
    if phase_offsets is not None:
        phases = phases + phase_offsets
    k = 2 * np.pi / beacon.wavelength
    proj = pts[:, :1] * np.cos(angles)[None, :] + pts[:, 1:] * np.sin(angles)[None, :]
    scattered = np.exp(1j * (k * proj + phases[None, :])).sum(axis=1) / np.sqrt(len(angles))

    bx, by = beacon.position
    los_dir = math.atan2(env.height / 2 - by, env.width / 2 - bx)
    los = np.exp(1j * (k * (pts[:, 0] * math.cos(los_dir) + pts[:, 1] * math.sin(los_dir)) + los_phase))
    K = beacon.rician_k
    if math.isinf(K):
        h = los
    else:
        h = math.sqrt(K / (K + 1)) * los + math.sqrt(1 / (K + 1)) * scattered
    return h[0] if single else h


def fading_field(env: Environment, beacon: SimBeacon, location, phase_offsets: Optional[np.ndarray] = None):
    """Multipath envelope power in dB relative to the mean."""
    h = fading_gain(env, beacon, location, phase_offsets)
    return 10.0 * np.log10(np.maximum(np.abs(h) ** 2, 1e-12))


def _rff_field(seed: int, pts: np.ndarray, corr: float, *key) -> np.ndarray:
    rng = rng_for(seed, "shadowing", *key)
    omega = rng.normal(0.0, 1.0 / corr, (SHADOWING_FEATURES, 2))
    offs = rng.uniform(0.0, 2 * np.pi, SHADOWING_FEATURES)
    return np.sqrt(2.0 / SHADOWING_FEATURES) * np.cos(pts @ omega.T + offs).sum(axis=1)


def shadowing(env: Environment, beacon: SimBeacon, location):
    """Seeded Gaussian field (dB) with correlation exp(-d^2 / 2 L^2), via random Fourier features.

    A fraction ``env.shadowing_common`` of the variance comes from a field
    shared by every beacon of the same technology (obstacles attenuate all
    of them alike); the rest is beacon-specific.
    """
    pts, single = _points(location)
    if env.shadowing_sigma == 0:
        out = np.zeros(len(pts))
    else:
        L = env.shadowing_correlation_distance
        rho = env.shadowing_common
        out = math.sqrt(1.0 - rho) * _rff_field(env.seed, pts, L, *_beacon_key(beacon))
        if rho > 0:
            out = out + math.sqrt(rho) * _rff_field(env.seed, pts, L, beacon.id.technology.value, "common")
        out = env.shadowing_sigma * out
    return out[0] if single else out


def rssi_at(env: Environment, beacon: SimBeacon, location, phase_offsets: Optional[np.ndarray] = None):
    """tx_power - path loss (1 m reference) - shadowing + fading, in dBm."""
    pts, single = _points(location)
    tol = 1e-9
    if np.any(pts < -tol) or np.any(pts[:, 0] > env.width + tol) or np.any(pts[:, 1] > env.height + tol):
        raise ValueError("location outside the environment bounds")
    d = np.hypot(pts[:, 0] - beacon.position[0], pts[:, 1] - beacon.position[1])
    if np.any(d == 0):
        raise ValueError("beacon coincides with the receiver location")
    out = beacon.tx_power - path_loss_db(d, 1.0) - shadowing(env, beacon, pts)
    if env.fading:
        out = out + fading_field(env, beacon, pts, phase_offsets)
    return float(out[0]) if single else out


def apply_device(profile: DeviceProfile, true_rssi, seed: int):
    """gain * rssi + offset + N(0, noise_sigma), noise seeded."""
    x = np.asarray(true_rssi, dtype=float)
    out = profile.gain * x + profile.offset
    if profile.noise_sigma > 0:
        out = out + rng_for(seed, "device", profile.device_id).normal(0.0, profile.noise_sigma, x.shape)
    return float(out) if out.ndim == 0 else out


def apply_device_to_scans(scans: Sequence[RawScan], profile: DeviceProfile, seed: int) -> list[RawScan]:
    """Re-express scans as if captured by `profile` (used for cross-device tests)."""
    out = []
    for scan in scans:
        readings = {}
        for beacon, samples in sorted(scan.readings.items(), key=lambda kv: kv[0].sort_key):
            s = derive_scan_seed(seed, scan.location.grid_index, beacon)
            readings[beacon] = tuple(float(v) for v in np.atleast_1d(apply_device(profile, samples, s)))
        out.append(replace(scan, device_id=profile.device_id, readings=readings))
    return out


def derive_scan_seed(seed: int, grid_index: int, beacon: BeaconId) -> int:
    return derive_seed(seed, grid_index, beacon.technology.value, beacon.channel)


def generate_dataset(
    env: Environment,
    grid: Optional[GridSpec] = None,
    device: DeviceProfile = REFERENCE_DEVICE,
    samples_per_location: int = 10,
    seed: int = 0,
    session_id: Optional[str] = None,
    placement_jitter: float = 0.1,
    sample_jitter: float = 0.02,
    phase_drift: float = 0.6,
    quantize: bool = False,
    sensitivity: Optional[Mapping[Technology, float]] = None,
) -> list[RawScan]:
    """One RawScan per grid point for a single measurement session.

    The environment (beacons, multipath structure, shadowing) is fixed by
    ``env.seed``; ``seed`` draws what changes between sessions: where the
    receiver is actually held around each nominal point, a small drift of
    the scattered-wave phases, and receiver noise.
    """
    grid = grid or env.grid
    pts = grid.locations(env.width, env.height)
    if not pts:
        raise ValueError("grid yields no locations")
    if samples_per_location < 1:
        raise ValueError("samples_per_location must be at least 1")
    sens = dict(DEFAULT_SENSITIVITY)
    if sensitivity:
        sens.update({Technology.parse(t): v for t, v in sensitivity.items()})
    session_id = session_id or f"s{seed}"

    nominal = np.array(pts, dtype=float)
    rng = rng_for(seed, "placement")
    centre = nominal + rng.normal(0.0, placement_jitter, nominal.shape)
    S = samples_per_location
    where = np.repeat(centre, S, axis=0) + rng.normal(0.0, sample_jitter, (len(pts) * S, 2))
    where[:, 0] = np.clip(where[:, 0], 0.0, env.width)
    where[:, 1] = np.clip(where[:, 1], 0.0, env.height)

    per_beacon = {}
    for beacon in sorted(env.beacons, key=lambda b: b.id.sort_key):
        drift = rng_for(seed, "drift", *_beacon_key(beacon)).normal(0.0, phase_drift, beacon.multipath_components)
        true = rssi_at(env, beacon, where, drift if phase_drift > 0 else None)
        seen = np.asarray(apply_device(device, true, _stream(seed, beacon)))
        if quantize:
            seen = np.round(seen)
        per_beacon[beacon.id] = seen.reshape(len(pts), S)

    scans = []
    for g, (x, y) in enumerate(pts):
        readings = {}
        for bid, vals in per_beacon.items():
            row = vals[g]
            row = row[row >= sens.get(bid.technology, -np.inf)]
            if row.size:
                readings[bid] = tuple(float(v) for v in row)
        loc = Location(float(x), float(y), env.environment_id, g)
        scans.append(RawScan(loc, device.device_id, session_id, readings, timestamp=float(g * S)))
    return scans


def _stream(seed: int, beacon: SimBeacon) -> int:
    return derive_seed(seed, "noise", *_beacon_key(beacon))


# presets -------------------------------------------------------------------

PRESETS = {
    "room": dict(width=12.0, height=6.0, grid=GridSpec("rect", 1.0), n_fm=50, n_wifi=15, n_gsm=7,
                 wifi_margin=15.0),
    "floor": dict(width=50.0, height=25.0, grid=GridSpec("perimeter", 1.6), n_fm=45, n_wifi=65, n_gsm=7,
                  wifi_margin=5.0),
}


def make_environment(
    preset: str,
    seed: int = 0,
    n_fm: Optional[int] = None,
    n_wifi: Optional[int] = None,
    n_gsm: Optional[int] = None,
    **overrides,
) -> Environment:
    """Build a preset environment; beacon geometry and channel state derive from `seed`."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[preset]
    W, H = p["width"], p["height"]
    n_fm = p["n_fm"] if n_fm is None else n_fm
    n_wifi = p["n_wifi"] if n_wifi is None else n_wifi
    n_gsm = p["n_gsm"] if n_gsm is None else n_gsm
    rng = rng_for(seed, "geometry", preset)
    cx, cy = W / 2, H / 2
    beacons: list[SimBeacon] = []

    # FM: distinct 100 kHz channels, 5-50 km away
    lo, hi = int(FM_BAND_HZ[0] / 1e5) + 1, int(FM_BAND_HZ[1] / 1e5)
    for ch in sorted(rng.choice(np.arange(lo, hi), n_fm, replace=False)):
        dist, bearing = rng.uniform(5e3, 50e3), rng.uniform(0, 2 * np.pi)
        f_hz = float(ch) * 1e5
        beacons.append(SimBeacon(
            BeaconId(Technology.FM, int(f_hz / 1e3), f"FM {f_hz / 1e6:.1f} MHz"),
            (cx + dist * math.cos(bearing), cy + dist * math.sin(bearing)),
            float(rng.uniform(-10.0, 30.0)), SPEED_OF_LIGHT / f_hz,
        ))

    # Wi-Fi: access points in and around the building
    m = p["wifi_margin"]
    for i in range(n_wifi):
        pos = (rng.uniform(-m, W + m), rng.uniform(-m, H + m))
        beacons.append(SimBeacon(
            BeaconId(Technology.WIFI, i + 1, f"AP{i + 1:02d}"),
            pos, float(rng.uniform(-45.0, -30.0)), SPEED_OF_LIGHT / WIFI_HZ,
        ))

    # GSM: cells 0.3-3 km away
    cells = rng.choice(np.arange(10000, 65000), n_gsm, replace=False)
    for cell in sorted(cells):
        dist, bearing = rng.uniform(300.0, 3000.0), rng.uniform(0, 2 * np.pi)
        beacons.append(SimBeacon(
            BeaconId(Technology.GSM, int(cell), f"cell {int(cell)}"),
            (cx + dist * math.cos(bearing), cy + dist * math.sin(bearing)),
            float(rng.uniform(-10.0, 10.0)), SPEED_OF_LIGHT / GSM_HZ,
        ))

    env = Environment(W, H, tuple(beacons), seed=seed, environment_id=preset, grid=p["grid"],
                      shadowing_common=0.5)
    return replace(env, **overrides) if overrides else env


def environment_to_dict(env: Environment) -> dict:
    return {
        "environment_id": env.environment_id,
        "width": env.width,
        "height": env.height,
        "seed": env.seed,
        "shadowing_sigma": env.shadowing_sigma,
        "shadowing_correlation_distance": env.shadowing_correlation_distance,
        "fading": env.fading,
        "shadowing_common": env.shadowing_common,
        "grid": {"kind": env.grid.kind, "spacing": env.grid.spacing, "points": [list(p) for p in env.grid.points]},
        "beacons": [
            {
                "tech": b.id.technology.value, "channel": b.id.channel, "label": b.id.label,
                "x": b.position[0], "y": b.position[1], "tx_power": b.tx_power,
                "wavelength": b.wavelength, "multipath_components": b.multipath_components,
                "rician_k": b.rician_k if math.isfinite(b.rician_k) else "inf",
            }
            for b in env.beacons
        ],
    }


def environment_from_dict(doc: dict) -> Environment:
    """Accepts {"preset": "room"|"floor", "seed": ...} or a full environment document."""
    if "preset" in doc:
        extra = {k: doc[k] for k in ("shadowing_sigma", "shadowing_correlation_distance", "fading", "shadowing_common")
                 if k in doc}
        return make_environment(doc["preset"], int(doc.get("seed", 0)), doc.get("n_fm"), doc.get("n_wifi"),
                                doc.get("n_gsm"), **extra)
    g = doc.get("grid", {})
    grid = GridSpec(g.get("kind", "rect"), float(g.get("spacing", 1.0)),
                    tuple(tuple(p) for p in g.get("points", ())))
    beacons = tuple(
        SimBeacon(
            BeaconId(Technology.parse(b["tech"]), b["channel"], b.get("label")),
            (b["x"], b["y"]), b["tx_power"], b["wavelength"],
            int(b.get("multipath_components", 32)), float(b.get("rician_k", 0.0)),
        )
        for b in doc["beacons"]
    )
    return Environment(
        float(doc["width"]), float(doc["height"]), beacons, int(doc.get("seed", 0)),
        float(doc.get("shadowing_sigma", 4.0)), float(doc.get("shadowing_correlation_distance", 5.0)),
        doc.get("environment_id", "custom"), grid, bool(doc.get("fading", True)),
        float(doc.get("shadowing_common", 0.0)),
    )
