"""Test collision conditions, root finding and one-dimensional measures."""

import math

import numpy as np
import pytest

from src.collision import (
    CollisionQuery,
    Measure,
    Method,
    NonPolynomialError,
    QueryKind,
    RcriFlag,
    SsmResult,
    boundary_gap,
    bracket_scan,
    circle_centres,
    circle_gap_polynomial,
    circle_gap_roots,
    delta_v,
    numeric_collision_scan,
    obstacle_gap_samples,
    polynomial_roots,
    rcri_flag,
    rcri_time_to_collision,
    real_roots,
    ttc,
    vehicle_gap_samples,
)
from src.lti_core import LtiSystem, solve_lti
from src.models import BoundingCircle, VehicleGeometry


def drifting(x0, y0, vx, vy, horizon=20.0):
    """Point moving at constant velocity, as a polynomial [x, y] trajectory."""
    system = LtiSystem(a=np.zeros((2, 2)), b=[], c=[vx, vy])
    return solve_lti(system, [x0, y0], [], horizon)


def decaying(x0, horizon=20.0):
    """Non-polynomial [x, y] trajectory approaching the origin along x."""
    system = LtiSystem(a=np.diag([-1.0, -1.0]), b=[], c=[0.0, 0.0])
    return solve_lti(system, [x0, 0.0], [], horizon)


class TestCollisionQuery:
    """Test query validation."""

    def test_boundary_needs_side(self):
        """Test that a boundary query must name side 1 or 2."""
        with pytest.raises(ValueError):
            CollisionQuery("q", QueryKind.VEHICLE_BOUNDARY, "1", side=3)

    def test_pair_needs_target(self):
        """Test that a vehicle pair needs a target."""
        with pytest.raises(ValueError):
            CollisionQuery("q", QueryKind.VEHICLE_VEHICLE, "1")

    def test_self_pair_rejected(self):
        """Test that a vehicle cannot collide with itself."""
        with pytest.raises(ValueError):
            CollisionQuery("q", QueryKind.VEHICLE_VEHICLE, "1", target="1")

    def test_ttc_only_for_pairs(self):
        """Test that one-dimensional measures need two vehicles."""
        with pytest.raises(ValueError):
            CollisionQuery("q", QueryKind.VEHICLE_OBSTACLE, "1", target="rock", measure=Measure.TTC)

    def test_rcri_needs_deceleration(self):
        """Test that RCRI needs a positive braking deceleration."""
        with pytest.raises(ValueError):
            CollisionQuery("q", QueryKind.VEHICLE_VEHICLE, "1", target="2", measure=Measure.RCRI)

    def test_axis_checked(self):
        """Test that the axis is x or y."""
        with pytest.raises(ValueError):
            CollisionQuery("q", QueryKind.VEHICLE_VEHICLE, "1", target="2", axis="z")


class TestSsmResult:
    """Test result invariants."""

    def test_roots_sorted(self):
        """Test that roots are stored in ascending order."""
        result = SsmResult((3.0, 1.0), Method.ANALYTIC, 5.0)
        assert result.roots == (1.0, 3.0)
        assert result.t_c_star == 1.0
        assert result.has_collision

    def test_no_collision(self):
        """Test an empty result."""
        result = SsmResult((), Method.NUMERIC_SCAN, 5.0)
        assert result.t_c_star is None
        assert not result.has_collision

    def test_negative_root_rejected(self):
        """Test that roots must be non-negative."""
        with pytest.raises(ValueError):
            SsmResult((-1.0,), Method.ANALYTIC, 5.0)

    def test_root_beyond_horizon_rejected(self):
        """Test that roots must lie within the horizon."""
        with pytest.raises(ValueError):
            SsmResult((6.0,), Method.ANALYTIC, 5.0)


class TestTtc:
    """Test classic time-to-collision."""

    def test_closing(self):
        """Test the car-following example: (20 - 2.6) / (6 - 5)."""
        result = ttc(20.0, 0.0, 5.0, 6.0, 2.6, 25.0)
        assert result.t_c_star == pytest.approx(17.4)

    def test_opening(self):
        """Test that a faster leader gives no collision."""
        assert ttc(20.0, 0.0, 7.0, 6.0, 2.6).t_c_star is None

    def test_overlapping(self):
        """Test that an initial overlap is a collision at zero."""
        assert ttc(2.0, 0.0, 7.0, 6.0, 2.6).t_c_star == 0.0

    def test_beyond_horizon(self):
        """Test that a late collision is dropped."""
        assert ttc(20.0, 0.0, 5.0, 6.0, 2.6, 10.0).t_c_star is None

    def test_random_closing_pairs(self):
        """Test 1000 random pairs against (p_l - p_f - l) / (v_f - v_l)."""
        rng = np.random.default_rng(17)
        for _ in range(1000):
            p_follow, length = rng.uniform(-50.0, 50.0), rng.uniform(1.0, 6.0)
            p_lead = p_follow + length + rng.uniform(0.1, 100.0)
            v_lead, v_follow = rng.uniform(0.0, 40.0, size=2)
            result = ttc(p_lead, p_follow, v_lead, v_follow, length)
            if v_follow > v_lead:
                expected = (p_lead - p_follow - length) / (v_follow - v_lead)
                assert result.t_c_star == pytest.approx(expected, rel=1e-12)
            else:
                assert result.t_c_star is None

    def test_homogeneity(self):
        """Test that scaling lengths by a and speeds by b scales TTC by a / b."""
        rng = np.random.default_rng(19)
        for _ in range(100):
            a, b = rng.uniform(0.1, 10.0, size=2)
            base = ttc(30.0, 2.0, 4.0, 9.0, 2.6).t_c_star
            scaled = ttc(30.0 * a, 2.0 * a, 4.0 * b, 9.0 * b, 2.6 * a).t_c_star
            assert scaled == pytest.approx(base * a / b, rel=1e-12)


class TestRcri:
    """Test the braking-distance index."""

    def test_flag_dangerous(self):
        """Test margin S - v_f t_d - v_f^2/2d + v_l^2/2d."""
        flag, margin = rcri_flag(10.0, 20.0, 10.0, 5.0, 1.0)
        assert flag is RcriFlag.DANGEROUS
        assert margin == pytest.approx(-40.0)

    def test_flag_safe(self):
        """Test a generous spacing is safe."""
        flag, margin = rcri_flag(20.0, 20.0, 30.0, 5.0, 1.0)
        assert flag is RcriFlag.SAFE
        assert margin == pytest.approx(10.0)

    def test_collision_during_reaction(self):
        """Test the root of 10 - 10 t - 2.5 t^2 before the follower brakes."""
        result = rcri_time_to_collision(10.0, 20.0, 10.0, 5.0, 1.0, 20.0)
        assert result.t_c_star == pytest.approx(-2.0 + math.sqrt(8.0))

    def test_safe_spacing_has_no_root(self):
        """Test that stopping distances that fit give no collision."""
        result = rcri_time_to_collision(20.0, 20.0, 30.0, 5.0, 1.0, 20.0)
        assert result.t_c_star is None

    def test_delta_v_attached(self):
        """Test DeltaV is reported when masses are known."""
        result = rcri_time_to_collision(10.0, 20.0, 10.0, 5.0, 1.0, 20.0, (1500.0, 1500.0))
        follower, leader = result.delta_v
        assert follower == pytest.approx(-leader)
        assert follower < 0

    def test_invalid_deceleration_rejected(self):
        """Test that d_m must be positive."""
        with pytest.raises(ValueError):
            rcri_time_to_collision(10.0, 20.0, 10.0, 0.0, 1.0)

    def test_random_flags(self):
        """Test 1000 random flags against the sign of the stopping-distance margin."""
        rng = np.random.default_rng(23)
        for _ in range(1000):
            v_lead, v_follow = rng.uniform(0.0, 40.0, size=2)
            gap, d_m, t_d = rng.uniform(0.5, 80.0), rng.uniform(2.0, 9.0), rng.uniform(0.0, 2.5)
            flag, margin = rcri_flag(v_lead, v_follow, gap, d_m, t_d)
            expected = gap - v_follow * t_d - v_follow**2 / (2 * d_m) + v_lead**2 / (2 * d_m)
            assert margin == pytest.approx(expected, rel=1e-12, abs=1e-12)
            assert flag is (RcriFlag.DANGEROUS if expected <= 0 else RcriFlag.SAFE)

    def test_random_against_dense_scan(self):
        """Test 200 random braking pairs against the first sign change on a 1e-4 s grid."""
        rng = np.random.default_rng(29)
        step, horizon = 1e-4, 20.0
        t = np.arange(0.0, horizon + step / 2, step)
        for _ in range(200):
            v_lead, v_follow = rng.uniform(0.0, 30.0, size=2)
            gap, d_m, t_d = rng.uniform(0.5, 50.0), rng.uniform(2.0, 8.0), rng.uniform(0.5, 2.0)
            braking_lead = np.minimum(t, v_lead / d_m)
            lead = gap + v_lead * braking_lead - 0.5 * d_m * braking_lead**2
            braking_follow = np.clip(t - t_d, 0.0, v_follow / d_m)
            follow = (
                v_follow * np.minimum(t, t_d)
                + v_follow * braking_follow
                - 0.5 * d_m * braking_follow**2
            )
            contact = np.flatnonzero(lead - follow <= 0.0)

            result = rcri_time_to_collision(v_lead, v_follow, gap, d_m, t_d, horizon)
            if contact.size:
                assert result.t_c_star == pytest.approx(t[contact[0]], abs=2 * step)
            else:
                assert result.t_c_star is None


class TestPolynomialRoots:
    """Test companion-matrix root finding."""

    def test_quadratic(self):
        """Test t^2 - 1."""
        assert real_roots(polynomial_roots([-1.0, 0.0, 1.0])) == pytest.approx([-1.0, 1.0])

    def test_trailing_zero_trimmed(self):
        """Test that a vanishing leading coefficient lowers the degree."""
        assert real_roots(polynomial_roots([-2.0, 1.0, 0.0])) == pytest.approx([2.0])

    def test_constant_has_no_roots(self):
        """Test constant and zero polynomials."""
        assert polynomial_roots([3.0]).size == 0
        assert polynomial_roots([0.0, 0.0]).size == 0

    def test_complex_roots_filtered(self):
        """Test that t^2 + 1 has no real roots."""
        assert real_roots(polynomial_roots([1.0, 0.0, 1.0])) == []

    def test_random_sextics(self):
        """Test 1000 sextics with six real roots at least 0.5 apart in [-5, 5]."""
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(1000):
            slack = rng.dirichlet(np.ones(7)) * 7.5
            expected = -5.0 + slack[0] + np.concatenate(([0.0], np.cumsum(0.5 + slack[1:6])))
            coefficients = rng.uniform(0.5, 2.0) * np.poly(expected)[::-1]
            found = real_roots(polynomial_roots(coefficients))
            assert len(found) == 6
            worst = max(worst, float(np.max(np.abs(np.array(found) - expected))))
        assert worst < 1e-7


class TestCircleGap:
    """Test the polynomial circle-contact route."""

    def test_approach_and_separation(self):
        """Test (t - 10)^2 - 4 has roots 8 and 12."""
        result = circle_gap_roots(drifting(0, 0, 1, 0), drifting(10, 0, 0, 0), 1.0, 1.0, 20.0)
        assert result.roots == pytest.approx((8.0, 12.0))
        assert result.method is Method.ANALYTIC

    def test_miss(self):
        """Test a lateral offset larger than both radii."""
        result = circle_gap_roots(drifting(0, 5, 1, 0), drifting(10, 0, 0, 0), 1.0, 1.0, 20.0)
        assert result.t_c_star is None

    def test_gap_polynomial_coefficients(self):
        """Test the coefficients of (t - 10)^2 - 4."""
        coefficients = circle_gap_polynomial(
            drifting(0, 0, 1, 0), drifting(10, 0, 0, 0), 1.0, 1.0
        )
        assert coefficients[:3] == pytest.approx([96.0, -20.0, 1.0])

    def test_non_polynomial_rejected(self):
        """Test that exponential motion cannot use the polynomial route."""
        with pytest.raises(NonPolynomialError):
            circle_gap_polynomial(decaying(10.0), drifting(0, 0, 0, 0), 1.0, 1.0)


class TestBracketScan:
    """Test the scan-and-refine route."""

    def test_single_crossing(self):
        """Test g(t) = t - 1."""
        assert bracket_scan(lambda t: t - 1.0, 10.0).t_c_star == pytest.approx(1.0)

    def test_no_crossing(self):
        """Test a positive constant gap."""
        assert bracket_scan(lambda t: np.ones_like(np.asarray(t, dtype=float)), 10.0).roots == ()

    def test_exponential_approach(self):
        """Test 10 e^{-t} - 2 crossing at ln 5."""
        trajectory = decaying(10.0)
        result = bracket_scan(lambda t: np.atleast_2d(trajectory(t))[:, 0] - 2.0, 10.0)
        assert result.t_c_star == pytest.approx(math.log(5.0), abs=1e-9)

    def test_agrees_with_polynomial_route(self):
        """Test that both analytic routes find the same contact."""
        moving, fixed = drifting(0, 0, 1, 0), drifting(10, 0, 0, 0)
        geometry = VehicleGeometry.single(2.0, 1.0)
        result = bracket_scan(
            lambda t: vehicle_gap_samples(moving(t), geometry, fixed(t), geometry), 20.0
        )
        assert result.roots == pytest.approx((8.0, 12.0))

    def test_invalid_step_rejected(self):
        """Test that the bracket width must be positive."""
        with pytest.raises(ValueError):
            bracket_scan(lambda t: t, 1.0, 0.0)


class TestGapSamples:
    """Test sampled clearances."""

    def test_boundary_gap_signs(self):
        """Test the left and right boundary gap conventions."""
        assert boundary_gap(lambda t: 0.0, 1.3, 6.0, 1)(0.0) == pytest.approx(-1.7)
        assert boundary_gap(lambda t: 1.7, 1.3, 6.0, 1)(0.0) == pytest.approx(0.0)
        assert boundary_gap(lambda t: 0.0, 1.3, 6.0, 2)(0.0) == pytest.approx(1.7)

    def test_offset_circle_centres(self):
        """Test an offset circle follows the heading."""
        geometry = VehicleGeometry(2.0, (BoundingCircle(0.0, 1.0), BoundingCircle(1.0, 0.5)))
        centres = circle_centres(np.array([[0.0, 0.0, math.pi / 2]]), geometry)
        assert centres[1][0][0] == pytest.approx([0.0, 1.0])
        assert centres[1][1] == 0.5

    def test_obstacle_gap(self):
        """Test the clearance to a static obstacle."""
        geometry = VehicleGeometry.single(2.0, 1.0)
        poses = np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        assert obstacle_gap_samples(poses, geometry, (5.0, 0.0), 1.0) == pytest.approx([3.0, 0.0])


class TestNumericScan:
    """Test the sign-change scan over sampled gaps."""

    def test_interpolated_crossings(self):
        """Test entry and exit roots interpolated inside their steps."""
        result = numeric_collision_scan(np.array([1.0, 0.5, -0.5, -1.0, 0.5]), 0.1)
        assert result.roots == pytest.approx((0.15, 0.1 * (3 + 2 / 3)))
        assert result.method is Method.NUMERIC_SCAN
        assert result.horizon == pytest.approx(0.4)

    def test_initial_overlap(self):
        """Test that a non-positive first sample is a collision at zero."""
        assert numeric_collision_scan(np.array([-1.0, -0.5]), 0.1).t_c_star == 0.0

    def test_no_crossing(self):
        """Test positive gaps throughout."""
        assert numeric_collision_scan(np.array([1.0, 2.0, 3.0]), 0.1).roots == ()


class TestDeltaV:
    """Test perfectly plastic velocity changes."""

    def test_equal_masses(self):
        """Test equal masses share the change."""
        assert delta_v(1500.0, 1500.0, 10.0, 0.0) == pytest.approx((-5.0, 5.0))

    def test_infinite_partner(self):
        """Test a wall absorbs nothing and stops the vehicle."""
        assert delta_v(1500.0, math.inf, 10.0, 0.0) == pytest.approx((-10.0, 0.0))

    def test_non_positive_mass_rejected(self):
        """Test that masses must be positive."""
        with pytest.raises(ValueError):
            delta_v(0.0, 1500.0, 1.0, 0.0)

    def test_infinite_self(self):
        """Test an infinite first mass keeps its velocity."""
        assert delta_v(math.inf, 1500.0, 0.0, 10.0) == pytest.approx((0.0, -10.0))

    def test_momentum_conserved(self):
        """Test m_i dv_i + m_j dv_j vanishes relative to |m dv| over random draws."""
        rng = np.random.default_rng(20240607)
        for _ in range(1000):
            mass_i, mass_j = rng.uniform(500.0, 5e4, size=2)
            v_i, v_j = rng.uniform(-40.0, 40.0, size=2)
            dv_i, dv_j = delta_v(mass_i, mass_j, v_i, v_j)
            scale = max(abs(mass_i * dv_i), abs(mass_j * dv_j), 1e-300)
            assert abs(mass_i * dv_i + mass_j * dv_j) <= 1e-12 * scale
