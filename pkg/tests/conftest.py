import numpy as np
import pytest

from ambientloc.core import (
    BeaconId,
    Fingerprint,
    Location,
    NormalizationParams,
    RadioMap,
    Technology,
    prepare_maps,
)
from ambientloc.sim import generate_dataset, make_environment


def fm(ch):
    return BeaconId(Technology.FM, ch)


def make_map(coords, values, env="test"):
    """Radio map from explicit coordinates and fingerprint rows."""
    values = np.asarray(values, dtype=float)
    beacons = tuple(fm(88000 + 100 * i) for i in range(values.shape[1]))
    fps = tuple(
        Fingerprint(v, Location(float(x), float(y), env, g)) for g, ((x, y), v) in enumerate(zip(coords, values))
    )
    return RadioMap(beacons, fps, NormalizationParams({Technology.FM: (-100.0, -40.0)}), env)


@pytest.fixture(scope="session")
def room_sessions():
    env = make_environment("room", seed=3)
    return env, generate_dataset(env, seed=11), generate_dataset(env, seed=12)


@pytest.fixture(scope="session")
def room_fm_maps(room_sessions):
    _, a, b = room_sessions
    return prepare_maps(a, b, [Technology.FM])
