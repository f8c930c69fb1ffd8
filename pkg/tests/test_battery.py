import pytest
from hypothesis import given
from hypothesis import strategies as st

from ambientloc.battery import (
    BASELINE_LIFE_H,
    PowerModel,
    fit_scan_cost,
    fm_model,
    predict_life,
    sweep,
    wifi_model,
)


def test_zero_cost_is_baseline():
    m = PowerModel(43.3, 0.0)
    assert [life for _, life in sweep(m, [1, 10, 100])] == [43.3] * 3


def test_baseline_inferred_value():
    # 1.3 h being 3% of the baseline
    assert BASELINE_LIFE_H == pytest.approx(1.3 / 0.03, abs=0.05)


def test_wifi_scan_cost():
    assert wifi_model().scan_cost == pytest.approx(10 * (1 / 7.4 - 1 / 43.3))
    assert wifi_model().scan_cost == pytest.approx(1.120, abs=1e-3)


def test_wifi_second_point():
    assert predict_life(wifi_model(), 20.0) == pytest.approx(12.6, abs=0.2)


def test_fm_ten_seconds():
    k = 1 * (1 / 27.9 - 1 / 43.3)
    expected = 1 / (1 / 43.3 + k / 10)
    assert predict_life(fm_model(), 10.0) == pytest.approx(expected)
    assert predict_life(fm_model(), 10.0) == pytest.approx(41.0, abs=0.5)


def test_fm_fit_point():
    assert predict_life(fm_model(), 1.0) == pytest.approx(27.9)


def test_beacon_scaling():
    m = fm_model()
    assert m.with_beacons(6).scan_cost == pytest.approx(2 * m.scan_cost)
    assert fm_model(beacons=6).scan_cost == pytest.approx(2 * m.scan_cost)
    with pytest.raises(ValueError):
        PowerModel(40.0, 1.0).with_beacons(3)


def test_near_baseline_observation():
    assert fit_scan_cost(43.3, (10.0, 43.3 - 1e-9)).scan_cost == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("obs", [(0.0, 10.0), (10.0, 50.0), (10.0, 0.0)])
def test_invalid_observation(obs):
    with pytest.raises(ValueError):
        fit_scan_cost(43.3, obs)


def test_invalid_model():
    with pytest.raises(ValueError):
        PowerModel(0.0, 1.0)
    with pytest.raises(ValueError):
        PowerModel(10.0, -1.0)
    with pytest.raises(ValueError):
        predict_life(PowerModel(10.0, 1.0), 0.0)


@given(st.floats(1.0, 1000.0), st.floats(0.1, 1000.0), st.floats(0.01, 0.99))
def test_round_trip(L0, T, frac):
    L = frac * L0
    assert predict_life(fit_scan_cost(L0, (T, L)), T) == pytest.approx(L, rel=1e-12)


@given(st.floats(0.01, 10.0), st.floats(0.1, 500.0), st.floats(0.1, 500.0))
def test_monotone_and_bounded(k, a, b):
    m = PowerModel(43.3, k)
    lo, hi = sorted((a, b))
    assert predict_life(m, lo) <= predict_life(m, hi) < 43.3
