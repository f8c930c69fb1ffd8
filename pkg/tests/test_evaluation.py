import pytest
from hypothesis import given
from hypothesis import strategies as st

from ambientloc.core import Location, Technology
from ambientloc.engines import CrossDeviceMethod, Engine, EngineConfig, LocalizationEstimate
from ambientloc.evaluation import (
    ExperimentConfig,
    ExperimentError,
    compute_stats,
    error_distance,
    nearest_rank,
    run_experiment,
)
from ambientloc.sim import generate_dataset, make_environment

# exact zeros or clearly positive values; sub-nanometre errors count as zero by design
errors_st = st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 100.0)), min_size=1, max_size=100)


def rank_oracle(errors, p):
    """Enumerate order statistics: smallest value v with #{e <= v} >= p*n."""
    n = len(errors)
    for v in sorted(errors):
        if sum(e <= v for e in errors) >= p * n - 1e-9:
            return v
    return max(errors)


class TestErrorDistance:
    def test_zero(self):
        assert error_distance(LocalizationEstimate(2, 3, environment_id="e"), Location(2, 3, "e")) == 0

    def test_345(self):
        assert error_distance(LocalizationEstimate(0, 0), Location(3, 4)) == 5.0

    def test_hand_computed(self):
        assert error_distance(LocalizationEstimate(1.5, 2.0), Location(4.5, 6.0)) == pytest.approx(5.0)

    def test_environment_mismatch(self):
        with pytest.raises(ValueError):
            error_distance(LocalizationEstimate(0, 0, environment_id="a"), Location(0, 0, "b"))


class TestComputeStats:
    def test_all_zero(self):
        s = compute_stats([0.0] * 7)
        assert (s.classification_rate, s.median, s.p95) == (1.0, 0.0, 0.0)

    def test_four_zeros_and_ten(self):
        s = compute_stats([0, 0, 0, 0, 10])
        assert s.classification_rate == 0.8
        assert s.median == 0.0
        assert s.p90 == 10.0

    def test_one_to_hundred(self):
        s = compute_stats(list(range(1, 101)))
        assert (s.median, s.p90, s.p95) == (50.0, 90.0, 95.0)

    def test_rejects_bad(self):
        for bad in ([], [-1.0], [float("nan")]):
            with pytest.raises(ValueError):
                compute_stats(bad)

    def test_sub_nanometre_counts_as_exact(self):
        assert compute_stats([1e-12, 0.0, 2.0]).classification_rate == pytest.approx(2 / 3)

    def test_snap_rate(self):
        assert compute_stats([0.1, 0.4, 0.6, 2.0], snap_radius=0.5).snap_rate == 0.5

    @given(errors_st)
    def test_percentiles_match_enumeration(self, errs):
        s = compute_stats(errs)
        for p, got in ((0.5, s.median), (0.9, s.p90), (0.95, s.p95)):
            assert got == rank_oracle(errs, p)

    @given(errors_st)
    def test_ordering_and_cdf(self, errs):
        s = compute_stats(errs)
        assert s.median <= s.p90 <= s.p95
        ys = [y for _, y in s.cdf]
        assert all(a < b for a, b in zip(ys, ys[1:]))
        assert ys[-1] == pytest.approx(1.0)
        at_zero = s.cdf[0][1] if s.cdf[0][0] == 0.0 else 0.0
        assert s.classification_rate == pytest.approx(at_zero)

    @given(errors_st, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, errs, rnd):
        shuffled = list(errs)
        rnd.shuffle(shuffled)
        assert compute_stats(shuffled) == compute_stats(errs)

    @given(errors_st, st.floats(0.01, 10.0))
    def test_shift(self, errs, eps):
        a, b = compute_stats(errs), compute_stats([e + eps for e in errs])
        assert b.classification_rate == 0.0
        for f in ("median", "p90", "p95"):
            assert getattr(b, f) == pytest.approx(getattr(a, f) + eps)


def test_nearest_rank_small():
    assert nearest_rank([1.0], 0.95) == 1.0
    assert nearest_rank([1.0, 2.0], 0.5) == 1.0


@pytest.fixture(scope="module")
def room():
    env = make_environment("room", seed=5)
    return generate_dataset(env, seed=1), generate_dataset(env, seed=2)


class TestRunExperiment:
    def test_self_test(self, room):
        a, _ = room
        r = run_experiment(ExperimentConfig(a, a))
        assert r.stats.classification_rate == 1.0
        assert len(r.records) == 55

    def test_other_session_is_worse(self, room):
        a, b = room
        assert run_experiment(ExperimentConfig(a, b)).stats.classification_rate < 1.0

    def test_three_technologies(self, room):
        a, b = room
        rows = [run_experiment(ExperimentConfig(a, b, (t,))) for t in Technology]
        assert [r.label for r in rows] == ["fm", "wifi", "gsm"]
        assert {r.beacons[0].technology for r in rows} == set(Technology)

    def test_gp_reports_snap_rate(self, room):
        a, b = room
        r = run_experiment(ExperimentConfig(a, b, engine=EngineConfig(engine=Engine.GP), grid_spacing=1.0))
        assert r.stats.snap_rate is not None

    def test_subset(self, room):
        a, b = room
        r = run_experiment(ExperimentConfig(a, b, subset={"strategy": "strongest", "n": 3}))
        assert len(r.beacons) == 3

    def test_method_on_svm_rejected(self, room):
        a, b = room
        with pytest.raises(ExperimentError) as ei:
            run_experiment(ExperimentConfig(a, b, engine=EngineConfig(engine=Engine.SVM),
                                            method=CrossDeviceMethod.CORRELATION))
        assert ei.value.step == "engine"

    def test_mixed_environments(self, room):
        a, _ = room
        other = generate_dataset(make_environment("floor", seed=5, n_fm=3), seed=1)
        with pytest.raises(ExperimentError) as ei:
            run_experiment(ExperimentConfig(a, other))
        assert ei.value.step == "load"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExperimentError):
            run_experiment(ExperimentConfig(tmp_path / "nope.csv", tmp_path / "nope.csv"))
