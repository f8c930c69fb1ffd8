"""Scan CSV and radio-map JSON readers/writers."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .core import BeaconId, Fingerprint, Location, NormalizationParams, RadioMap, RawScan, Technology

SCHEMA_VERSION = 1
SCAN_COLUMNS = ["session_id", "device_id", "grid_index", "x", "y", "tech", "channel", "rssi_dbm", "sample_index"]


class FormatError(ValueError):
    pass


def _num(v: float) -> str:
    # shortest round-trip repr keeps files byte-stable across runs
    return repr(float(v))


def write_scans_csv(scans: Iterable[RawScan], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_COLUMNS)
        for scan in scans:
            loc = scan.location
            for beacon in sorted(scan.readings, key=lambda b: b.sort_key):
                for k, rssi in enumerate(scan.readings[beacon]):
                    w.writerow([
                        scan.session_id, scan.device_id, loc.grid_index, _num(loc.x), _num(loc.y),
                        beacon.technology.value, beacon.channel, _num(rssi), k,
                    ])


def read_scans_csv(path: str | Path, environment_id: str | None = None) -> list[RawScan]:
    """Group CSV rows back into one RawScan per (session, device, grid_index)."""
    env = environment_id or Path(path).stem
    groups: dict[tuple, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SCAN_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (row["session_id"], row["device_id"], int(row["grid_index"]))
                beacon = BeaconId(Technology.parse(row["tech"]), int(row["channel"]))
                xy = (float(row["x"]), float(row["y"]))
                sample = (int(row["sample_index"]), float(row["rssi_dbm"]))
            except (ValueError, KeyError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            g = groups.setdefault(key, {"xy": xy, "readings": defaultdict(list)})
            if g["xy"] != xy:
                raise FormatError(f"{path}:{lineno}: grid_index {key[2]} has inconsistent coordinates")
            g["readings"][beacon].append(sample)
    scans = []
    for (session, device, grid), g in groups.items():
        readings = {b: tuple(v for _, v in sorted(s)) for b, s in g["readings"].items()}
        loc = Location(g["xy"][0], g["xy"][1], env, grid)
        scans.append(RawScan(loc, device, session, readings))
    scans.sort(key=lambda s: (s.session_id, s.device_id, s.location.grid_index))
    return scans


def radio_map_to_dict(rmap: RadioMap) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "environment": rmap.environment_id,
        "device_id": rmap.device_id,
        "session_id": rmap.session_id,
        "beacons": [{"tech": b.technology.value, "channel": b.channel, "label": b.label} for b in rmap.beacons],
        "norm": {t.value: {"min": lo, "max": hi} for t, (lo, hi) in rmap.norm.ranges.items()},
        "fingerprints": [
            {
                "grid_index": fp.location.grid_index,
                "x": fp.location.x,
                "y": fp.location.y,
                "values": [float(v) for v in fp.values],
            }
            for fp in rmap.fingerprints
        ],
    }


def radio_map_from_dict(doc: dict) -> RadioMap:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"unsupported radio-map schema_version {doc.get('schema_version')!r}")
    try:
        env = doc["environment"]
        beacons = [BeaconId(Technology.parse(b["tech"]), b["channel"], b.get("label")) for b in doc["beacons"]]
        norm = NormalizationParams({Technology.parse(t): (r["min"], r["max"]) for t, r in doc["norm"].items()})
        fps = [
            Fingerprint(f["values"], Location(f["x"], f["y"], env, f["grid_index"]))
            for f in doc["fingerprints"]
        ]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed radio map: {exc}") from exc
    return RadioMap(tuple(beacons), tuple(fps), norm, env, doc.get("device_id", ""), doc.get("session_id", ""))


def save_radio_map(rmap: RadioMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(radio_map_to_dict(rmap), indent=2) + "\n")


def load_radio_map(path: str | Path) -> RadioMap:
    return radio_map_from_dict(json.loads(Path(path).read_text()))


def write_rows_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, float) else v for v in row])


def save_model(rmap: RadioMap, engine_config, path: str | Path) -> None:
    """Engines are deterministic in (map, config), so the artifact stores both and retrains on load."""
    doc = {"schema_version": SCHEMA_VERSION, "kind": "engine_artifact",
           "engine": engine_config.to_dict(), "radio_map": radio_map_to_dict(rmap)}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path: str | Path):
    from .engines import EngineConfig

    doc = json.loads(Path(path).read_text())
    if doc.get("kind") != "engine_artifact" or doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"{path}: not a version-{SCHEMA_VERSION} engine artifact")
    return radio_map_from_dict(doc["radio_map"]), EngineConfig.from_dict(doc["engine"])
