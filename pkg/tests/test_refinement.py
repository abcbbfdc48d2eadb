"""Test step refinement and error classification."""

import pytest

from src.errors import IntegrationError, ModelError
from src.refinement import RefinementPolicy, is_recoverable_error


class TestRefinementPolicy:
    """Test RefinementPolicy class."""

    def test_step_halving(self):
        """Test that steps halve on each attempt."""
        policy = RefinementPolicy(min_step=1e-9)
        steps = [policy.get_step(0.008, i) for i in range(4)]
        assert steps == pytest.approx([0.008, 0.004, 0.002, 0.001])

    def test_step_floor(self):
        """Test that the step never drops below the floor."""
        policy = RefinementPolicy(min_step=0.003)
        assert policy.get_step(0.008, 3) == 0.003

    def test_refines_after_failure(self):
        """Test that a failed attempt is retried with a finer step over the same horizon."""
        calls = []

        def integrate(h, n_steps):
            calls.append((h, n_steps))
            if len(calls) <= 2:
                raise IntegrationError("state became non-finite", step_index=3)
            return "done"

        result = RefinementPolicy().integrate(integrate, 0.01, 100)

        assert result == "done"
        assert [n for _, n in calls] == [100, 200, 400]
        assert calls[-1][0] == pytest.approx(0.0025)

    def test_gives_up_after_max_refinements(self):
        """Test that the last failure surfaces once refinements are exhausted."""
        attempts = {"count": 0}

        def always_fail(h, n_steps):
            attempts["count"] += 1
            raise IntegrationError("state became non-finite", step_index=1)

        with pytest.raises(IntegrationError):
            RefinementPolicy(max_refinements=2).integrate(always_fail, 0.01, 10)

        assert attempts["count"] == 3  # Initial + 2 refinements

    def test_model_error_not_retried(self):
        """Test that a model guard violation fails on the first attempt."""
        attempts = {"count": 0}

        def guard(h, n_steps):
            attempts["count"] += 1
            raise ModelError("steering angle at +-pi/2")

        with pytest.raises(ModelError):
            RefinementPolicy().integrate(guard, 0.01, 10)

        assert attempts["count"] == 1


class TestIsRecoverableError:
    """Test error classification."""

    @pytest.mark.parametrize(
        "error",
        [
            IntegrationError("blow-up", step_index=2),
            OverflowError("math range error"),
            FloatingPointError("invalid value"),
            ValueError("state is NaN"),
        ],
    )
    def test_recoverable(self, error):
        """Test errors a finer step could fix."""
        assert is_recoverable_error(error)

    @pytest.mark.parametrize(
        "error",
        [ModelError("path singularity"), ValueError("unknown vehicle 'v9'"), KeyError("x")],
    )
    def test_not_recoverable(self, error):
        """Test errors about the input itself."""
        assert not is_recoverable_error(error)
