"""Test the rolling-horizon runner."""

import pytest

from src.collision import EvaluationMethod
from src.errors import EvaluationError
from src.predictor import Evaluation
from src.runner import DEFAULTS, RunRecord, evaluation_times, run
from src.scenario import load_scenario


class TestEvaluationTimes:
    """Test the evaluation grid."""

    def test_regular_grid(self):
        """Test 0, period, ... up to the duration."""
        assert evaluation_times(1.0, 0.3) == pytest.approx([0.0, 0.3, 0.6, 0.9])

    def test_grid_includes_duration(self):
        """Test that a duration on the grid is included despite rounding."""
        assert evaluation_times(0.3, 0.1) == pytest.approx([0.0, 0.1, 0.2, 0.3])

    def test_extra_times_merged(self):
        """Test that snapshot times are added and out-of-range ones skipped."""
        times = evaluation_times(1.0, 0.5, extra=(0.25, 0.5, 5.0))
        assert times == pytest.approx([0.0, 0.25, 0.5, 1.0])


class TestRunRecord:
    """Test run record bookkeeping."""

    def test_times_must_increase(self):
        """Test that appending an earlier time is rejected."""
        record = RunRecord("pair", EvaluationMethod.BOTH, ("gap",))
        record.append(1.0, {"gap": Evaluation("gap", 1.0)})
        with pytest.raises(ValueError):
            record.append(0.5, {"gap": Evaluation("gap", 0.5)})

    def test_at_nearest_time(self):
        """Test lookup by the closest recorded time."""
        record = RunRecord("pair", EvaluationMethod.BOTH, ("gap",))
        first, second = Evaluation("gap", 0.0), Evaluation("gap", 0.5)
        record.append(0.0, {"gap": first})
        record.append(0.5, {"gap": second})
        assert record.at(0.4)["gap"] is second
        assert record.at(0.1)["gap"] is first

    def test_at_empty_record(self):
        """Test that an empty record has nothing to look up."""
        with pytest.raises(KeyError):
            RunRecord("pair", EvaluationMethod.BOTH, ("gap",)).at(0.0)


class TestRun:
    """Test end-to-end runs of a small scenario."""

    def test_collision_time_shrinks_with_elapsed_time(self, pair_scenario, fast_defaults):
        """Test t_c* = 9.6 - T_r for a constant closing speed."""
        record = run(pair_scenario, defaults=fast_defaults)

        assert record.times == pytest.approx([0.0, 0.5, 1.0])
        analytic = [t_c for _, t_c in record.series("gap")]
        numeric = [t_c for _, t_c in record.series("gap", "numeric")]
        assert analytic == pytest.approx([9.6, 9.1, 8.6])
        assert numeric == pytest.approx([9.6, 9.1, 8.6], abs=1e-6)
        assert all(error < 1e-6 for _, error in record.errors("gap"))

    def test_method_override(self, pair_scenario, fast_defaults):
        """Test that analytic mode records no numeric route."""
        record = run(pair_scenario, EvaluationMethod.ANALYTIC, defaults=fast_defaults)
        assert record.method is EvaluationMethod.ANALYTIC
        assert record.series("gap", "numeric") == [(0.0, None), (0.5, None), (1.0, None)]

    def test_horizon_precedence(self, pair_text, fast_defaults):
        """Test argument over scenario over defaults."""
        scenario = load_scenario(pair_text + "horizon = 15\n")
        from_scenario = run(scenario, EvaluationMethod.ANALYTIC, defaults=fast_defaults)
        from_argument = run(scenario, EvaluationMethod.ANALYTIC, horizon=12.0, defaults=fast_defaults)
        assert from_scenario.evaluations[0]["gap"].analytic.horizon == 15.0
        assert from_argument.evaluations[0]["gap"].analytic.horizon == 12.0

    def test_collision_beyond_horizon_dropped(self, pair_scenario, fast_defaults):
        """Test that a horizon shorter than t_c* gives no collision."""
        record = run(pair_scenario, EvaluationMethod.ANALYTIC, horizon=5.0, defaults=fast_defaults)
        assert record.series("gap")[0] == (0.0, None)

    def test_snapshots_kept(self, pair_scenario, fast_defaults):
        """Test that requested snapshot times are evaluated and stored."""
        record = run(pair_scenario, snapshot_times=(0.25,), defaults=fast_defaults)
        assert 0.25 in record.times
        snapshot = record.snapshots[0.25]
        assert snapshot.vehicles["ego"].state == pytest.approx((2.5,))
        assert snapshot.vehicles["lead"].state == pytest.approx((51.25,))

    def test_failing_query_annotated(self, pair_scenario, fast_defaults, monkeypatch):
        """Test that a query failure carries the evaluation time and query id."""

        def fail(self, query, method):
            raise FloatingPointError("overflow")

        monkeypatch.setattr("src.runner.CollisionEvaluator.evaluate", fail)
        with pytest.raises(EvaluationError) as excinfo:
            run(pair_scenario, defaults=fast_defaults)
        assert excinfo.value.query_id == "gap"
        assert excinfo.value.time == 0.0

    def test_invalid_period_rejected(self, pair_scenario, fast_defaults):
        """Test that a zero period is rejected."""
        with pytest.raises(ValueError):
            run(pair_scenario, period=0.0, defaults=fast_defaults)

    def test_builtin_defaults(self):
        """Test the documented built-in defaults."""
        assert DEFAULTS["horizon"] == 20.0
        assert DEFAULTS["scan_step"] == 0.01


ACCELERATING_TEXT = """\
[scenario]
format = ssm-scenario v1
name = accelerating

[vehicle.ego]
model = di1d
state = 0, 12
control = 0.5
radius = 1

[vehicle.lead]
model = cv1d
state = 60
control = 5
radius = 1

[query.gap]
kind = vehicle-vehicle
ego = ego
target = lead

[sim]
duration = 3
period = 0.25
"""


class TestRollingHorizon:
    """Test consecutive evaluations of a world that matches the frozen-control prediction."""

    def test_slope_minus_one(self, fast_defaults):
        """Test t_c* drops by one period between evaluations; the scan route interpolates."""
        record = run(load_scenario(ACCELERATING_TEXT), defaults=fast_defaults)
        assert len(record.times) == 13
        for route, tolerance in (("analytic", 1e-6), ("numeric", 1e-5)):
            series = record.series("gap", route)
            for (t0, c0), (t1, c1) in zip(series[:-1], series[1:], strict=True):
                assert c1 - c0 == pytest.approx(-(t1 - t0), abs=tolerance)

    def test_first_collision_time(self, fast_defaults):
        """Test 0.25 t^2 + 7 t - 58 = 0 at T_r = 0."""
        record = run(load_scenario(ACCELERATING_TEXT), defaults=fast_defaults)
        expected = (-7.0 + (49.0 + 58.0) ** 0.5) / 0.5
        assert record.series("gap")[0][1] == pytest.approx(expected)
