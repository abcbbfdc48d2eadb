"""Test vehicle models and their linearizations."""

import math

import numpy as np
import pytest

from src.errors import ModelError
from src.models import (
    BoundingCircle,
    LongitudinalParams,
    ModelFamily,
    VehicleGeometry,
    jacobians,
    linearize,
    linearize_planar_speed_input,
    model_rhs,
    state_index,
)

PARAMS = LongitudinalParams(
    mass=1500.0,
    rho=1.2,
    drag_coefficient=0.25,
    frontal_area=2.0,
    wheel_radius=0.25,
    rolling_resistance=0.015,
)

OPERATING_POINTS = [
    (ModelFamily.BICYCLE_2D, [1.0, 2.0, 0.3, 8.0], [0.05, 0.5]),
    (ModelFamily.LONGITUDINAL, [9.0], [1900.0, 0.1]),
    (ModelFamily.LATERAL_PATH, [3.0, 0.4, -0.05], [0.02, 9.0, 0.01]),
    (ModelFamily.BICYCLE_3D, [0.0, -2.0, 0.1, 8.0], [0.02, 1900.0, 0.5]),
    (ModelFamily.LATERAL_PATH_3D, [0.0, 0.15, -0.02, 9.0], [0.024, 2000.0, 0.5, 0.015]),
]


def finite_difference(rhs, x0, u0, step=1e-6):
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    a = np.column_stack(
        [(rhs(x0 + step * e, u0) - rhs(x0 - step * e, u0)) / (2 * step) for e in np.eye(len(x0))]
    )
    b = np.column_stack(
        [(rhs(x0, u0 + step * e) - rhs(x0, u0 - step * e)) / (2 * step) for e in np.eye(len(u0))]
    )
    return a, b


class TestLongitudinalParams:
    """Test force-balance parameters."""

    def test_drag_factor(self):
        """Test rho * C_d * S / (2 m) for the standard car."""
        assert PARAMS.drag_factor == pytest.approx(0.0002)

    def test_equilibrium_torque_holds_speed(self):
        """Test that the equilibrium torque gives zero acceleration."""
        torque = PARAMS.equilibrium_torque(10.0, 0.05)
        assert PARAMS.acceleration(10.0, torque, 0.05) == pytest.approx(0.0, abs=1e-12)

    def test_non_positive_parameter_rejected(self):
        """Test that a zero mass is rejected."""
        with pytest.raises(ValueError):
            LongitudinalParams(0.0, 1.2, 0.25, 2.0, 0.25, 0.015)


class TestVehicleGeometry:
    """Test footprint validation."""

    def test_single_circle(self):
        """Test the single centred circle helper."""
        geometry = VehicleGeometry.single(2.5, 1.5, mass=1500.0)
        assert geometry.centred
        assert geometry.max_radius == 1.5

    def test_offset_circles(self):
        """Test that offset circles are not centred."""
        geometry = VehicleGeometry(2.5, (BoundingCircle(-1.0, 1.0), BoundingCircle(1.0, 1.2)))
        assert not geometry.centred
        assert geometry.max_radius == 1.2

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"wheelbase": 0.0, "circles": (BoundingCircle(0.0, 1.0),)},
            {"wheelbase": 2.0, "circles": ()},
            {"wheelbase": 2.0, "circles": (BoundingCircle(0.0, -1.0),)},
            {"wheelbase": 2.0, "circles": (BoundingCircle(0.0, 1.0),), "mass": 0.0},
        ],
    )
    def test_invalid_geometry_rejected(self, kwargs):
        """Test each geometry guard."""
        with pytest.raises(ValueError):
            VehicleGeometry(**kwargs)


class TestRightHandSides:
    """Test the nonlinear models."""

    def test_bicycle_straight(self):
        """Test a straight bicycle moves along its heading."""
        rhs = model_rhs(ModelFamily.BICYCLE_2D, 2.0)
        assert rhs(np.array([0.0, 0.0, 0.0, 5.0]), np.array([0.0, 1.0])) == pytest.approx(
            [5.0, 0.0, 0.0, 1.0]
        )

    def test_steering_guard(self):
        """Test that |delta| >= pi/2 is a model error."""
        rhs = model_rhs(ModelFamily.BICYCLE_2D, 2.0)
        with pytest.raises(ModelError):
            rhs(np.array([0.0, 0.0, 0.0, 5.0]), np.array([math.pi / 2, 0.0]))

    def test_path_singularity_guard(self):
        """Test that 1 - e_cg * kappa near zero is a model error."""
        rhs = model_rhs(ModelFamily.LATERAL_PATH, 2.0)
        with pytest.raises(ModelError):
            rhs(np.array([0.0, 100.0, 0.0]), np.array([0.0, 5.0, 0.01]))

    def test_lateral_path_on_centreline(self):
        """Test a vehicle aligned with a curve only advances along it."""
        rhs = model_rhs(ModelFamily.LATERAL_PATH, 2.0)
        kappa = 0.01
        delta = math.atan(2.0 * kappa)
        assert rhs(np.zeros(3), np.array([delta, 5.0, kappa])) == pytest.approx([5.0, 0.0, 0.0])

    def test_missing_parameters_rejected(self):
        """Test that force-balance models need longitudinal parameters."""
        with pytest.raises(ValueError):
            model_rhs(ModelFamily.BICYCLE_3D, 2.0)

    def test_state_index(self):
        """Test component lookup by label."""
        assert state_index(ModelFamily.LATERAL_PATH_3D, "v") == 3


class TestLinearization:
    """Test analytic Jacobians against finite differences."""

    @pytest.mark.parametrize("family, x0, u0", OPERATING_POINTS)
    def test_jacobians_match_finite_differences(self, family, x0, u0):
        """Test df/dx and df/du for every nonlinear model."""
        rhs = model_rhs(family, 2.0, PARAMS)
        a, b = jacobians(family, x0, u0, 2.0, PARAMS)
        a_fd, b_fd = finite_difference(rhs, x0, u0)
        assert a == pytest.approx(a_fd, rel=1e-5, abs=1e-6)
        assert b == pytest.approx(b_fd, rel=1e-5, abs=1e-6)

    @pytest.mark.parametrize("family, x0, u0", OPERATING_POINTS)
    def test_linear_model_passes_through_operating_point(self, family, x0, u0):
        """Test A x0 + B u0 + C equals f(x0, u0)."""
        system = linearize(family, x0, u0, wheelbase=2.0, params=PARAMS)
        expected = model_rhs(family, 2.0, PARAMS)(np.array(x0), np.array(u0))
        assert system.rhs(np.array(x0), np.array(u0)) == pytest.approx(expected)

    def test_frozen_control(self):
        """Test that a frozen control folds B u0 into the drift."""
        family, x0, u0 = OPERATING_POINTS[0]
        system = linearize(family, x0, u0, wheelbase=2.0, frozen_control=True)
        assert not np.any(system.b)
        expected = model_rhs(family, 2.0)(np.array(x0), np.array(u0))
        assert system.rhs(np.array(x0), np.zeros(2)) == pytest.approx(expected)

    def test_planar_speed_input(self):
        """Test the speed-driven pose model reproduces the bicycle kinematics."""
        pose = np.array([1.0, 2.0, 0.3])
        system = linearize_planar_speed_input(pose, 8.0, 0.05, 2.0)
        expected = model_rhs(ModelFamily.BICYCLE_2D, 2.0)(
            np.array([*pose, 8.0]), np.array([0.05, 0.0])
        )[:3]
        assert system.rhs(pose, np.array([8.0])) == pytest.approx(expected)


def random_operating_point(family, rng):
    """State and control drawn from the ranges the bundled scenarios exercise."""
    steer = rng.uniform(-0.5, 0.5)
    torque, grade = rng.uniform(0.0, 3000.0), rng.uniform(-0.3, 0.6)
    speed = rng.uniform(0.5, 30.0)
    pose = [rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(-math.pi, math.pi)]
    path = [rng.uniform(0.0, 100.0), rng.uniform(-3.0, 3.0), rng.uniform(-0.5, 0.5)]
    curvature = rng.uniform(-0.02, 0.02)
    points = {
        ModelFamily.BICYCLE_2D: (pose + [speed], [steer, rng.uniform(-3.0, 3.0)]),
        ModelFamily.LONGITUDINAL: ([speed], [torque, grade]),
        ModelFamily.LATERAL_PATH: (path, [steer, speed, curvature]),
        ModelFamily.BICYCLE_3D: (pose + [speed], [steer, torque, grade]),
        ModelFamily.LATERAL_PATH_3D: (path + [speed], [steer, torque, grade, curvature]),
    }
    return points[family]


class TestRandomLinearization:
    """Test analytic Jacobians against finite differences at random operating points."""

    @pytest.mark.parametrize("family", [family for family, _, _ in OPERATING_POINTS])
    def test_hundred_points(self, family):
        """Test df/dx and df/du at 100 seeded random points per model."""
        rng = np.random.default_rng(1234)
        rhs = model_rhs(family, 2.0, PARAMS)
        for _ in range(100):
            x0, u0 = random_operating_point(family, rng)
            a, b = jacobians(family, x0, u0, 2.0, PARAMS)
            a_fd, b_fd = finite_difference(rhs, x0, u0)
            assert a == pytest.approx(a_fd, rel=1e-5, abs=1e-6)
            assert b == pytest.approx(b_fd, rel=1e-5, abs=1e-6)
