"""Collision conditions, collision-time solvers and surrogate safety measures."""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.polynomial import polycompanion
from scipy.optimize import brentq

from src.lti_core import TIME_SLACK, AnalyticTrajectory, ControlSignal, solve_lti
from src.models import ModelFamily, VehicleGeometry, linearize
from src.trajectory import freeze_after_stop, stopping_time

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 20.0  # seconds
DEFAULT_SCAN_STEP = 0.01  # seconds
ROOT_TOLERANCE = 1e-10  # seconds, Brent refinement
LEADING_TOLERANCE = 1e-12  # relative size of discarded leading coefficients
REAL_TOLERANCE = 1e-7  # |Im| / (1 + |Re|) accepted as a real root
ZERO_GAP = 1e-12


class QueryKind(Enum):
    """Which collision condition a query evaluates."""

    VEHICLE_VEHICLE = "vehicle-vehicle"
    VEHICLE_OBSTACLE = "vehicle-obstacle"
    VEHICLE_BOUNDARY = "vehicle-boundary"


class Measure(Enum):
    """Safety measure used for the analytic route of a query."""

    TRAJECTORY = "trajectory"
    TTC = "ttc"
    RCRI = "rcri"


class Method(Enum):
    """How a collision time was obtained."""

    ANALYTIC = "analytic"
    NUMERIC_SCAN = "numeric-scan"


class EvaluationMethod(Enum):
    """Which routes a query is evaluated with."""

    ANALYTIC = "analytic"
    NUMERIC = "numeric"
    BOTH = "both"

    @property
    def wants_analytic(self) -> bool:
        return self is not EvaluationMethod.NUMERIC

    @property
    def wants_numeric(self) -> bool:
        return self is not EvaluationMethod.ANALYTIC


class RcriFlag(Enum):
    SAFE = "safe"
    DANGEROUS = "dangerous"


class NonPolynomialError(ValueError):
    """A trajectory segment is not polynomial; use ``bracket_scan`` instead."""


@dataclass(frozen=True)
class CollisionQuery:
    """One collision condition to evaluate.

    Attributes:
        query_id: Identifier used in reports
        kind: Vehicle-vehicle, vehicle-obstacle or vehicle-boundary
        ego: Vehicle whose risk is evaluated
        target: Other vehicle or obstacle id (unused for boundaries)
        side: Boundary 1 (left, +w/2) or 2 (right, -w/2)
        measure: Analytic measure (generic trajectory, TTC or RCRI)
        axis: Axis for one-dimensional measures ("x" or "y")
        max_deceleration: RCRI braking deceleration d_m (m/s^2)
        reaction_time: RCRI reaction delay t_d (s)
    """

    query_id: str
    kind: QueryKind
    ego: str
    target: str | None = None
    side: int | None = None
    measure: Measure = Measure.TRAJECTORY
    axis: str = "x"
    max_deceleration: float | None = None
    reaction_time: float = 0.0

    def __post_init__(self):
        if self.kind is QueryKind.VEHICLE_BOUNDARY:
            if self.side not in (1, 2):
                raise ValueError(f"boundary side must be 1 or 2, got {self.side}")
        elif self.target is None:
            raise ValueError(f"query '{self.query_id}' needs a target")
        if self.kind is QueryKind.VEHICLE_VEHICLE and self.target == self.ego:
            raise ValueError(f"query '{self.query_id}' pairs vehicle '{self.ego}' with itself")
        if self.measure is not Measure.TRAJECTORY and self.kind is not QueryKind.VEHICLE_VEHICLE:
            raise ValueError(f"measure '{self.measure.value}' applies to vehicle pairs only")
        if self.axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if self.measure is Measure.RCRI:
            if self.max_deceleration is None or not self.max_deceleration > 0:
                raise ValueError("RCRI needs a positive max_deceleration")
            if self.reaction_time < 0:
                raise ValueError("RCRI reaction_time must be non-negative")


@dataclass(frozen=True)
class SsmResult:
    """Collision roots of one query.

    Attributes:
        roots: Sorted non-negative collision times within the horizon
        method: Analytic or numeric scan
        horizon: Prediction horizon in seconds
        delta_v: (ego, other) velocity changes at the earliest collision
    """

    roots: tuple[float, ...]
    method: Method
    horizon: float
    delta_v: tuple[float, float] | None = None

    def __post_init__(self):
        roots = tuple(sorted(float(root) for root in self.roots))
        if any(root < 0 for root in roots):
            raise ValueError("collision roots must be non-negative")
        if any(root > self.horizon + TIME_SLACK for root in roots):
            raise ValueError("collision roots must lie within the horizon")
        object.__setattr__(self, "roots", roots)

    @property
    def t_c_star(self) -> float | None:
        """Earliest collision time, or None when no collision is predicted."""
        return self.roots[0] if self.roots else None

    @property
    def has_collision(self) -> bool:
        return bool(self.roots)


def _within(roots: Sequence[float], horizon: float) -> tuple[float, ...]:
    kept: list[float] = []
    for root in sorted(roots):
        if -TIME_SLACK <= root <= horizon + TIME_SLACK:
            root = min(max(root, 0.0), horizon)
            if not kept or root - kept[-1] > TIME_SLACK:
                kept.append(root)
    return tuple(kept)


def ttc(
    p_lead: float,
    p_follow: float,
    v_lead: float,
    v_follow: float,
    length: float,
    horizon: float = math.inf,
) -> SsmResult:
    """Classic time-to-collision ``(p_lead - p_follow - l) / (v_follow - v_lead)``.

    Args:
        p_lead: Leader position (m)
        p_follow: Follower position (m)
        v_lead: Leader speed (m/s)
        v_follow: Follower speed (m/s)
        length: Gap length l subtracted from the position difference (m)
        horizon: Roots beyond this are dropped

    Returns:
        Single root when closing, root 0 when already overlapping, none otherwise
    """
    gap = p_lead - p_follow - length
    if gap <= 0:
        return SsmResult((0.0,), Method.ANALYTIC, horizon)
    closing = v_follow - v_lead
    if closing <= 0:
        return SsmResult((), Method.ANALYTIC, horizon)
    root = gap / closing
    return SsmResult((root,) if root <= horizon else (), Method.ANALYTIC, horizon)


def rcri_flag(
    v_lead: float, v_follow: float, gap: float, max_deceleration: float, reaction_time: float
) -> tuple[RcriFlag, float]:
    """Compare stopping distances under maximum braking.

    ``dp = S - v_f t_d - v_f^2 / (2 d_m) + v_l^2 / (2 d_m)``; dangerous iff ``dp <= 0``.

    Returns:
        The flag and the final spacing margin ``dp`` in metres
    """
    margin = (
        gap
        - v_follow * reaction_time
        - v_follow**2 / (2.0 * max_deceleration)
        + v_lead**2 / (2.0 * max_deceleration)
    )
    return (RcriFlag.DANGEROUS if margin <= 0 else RcriFlag.SAFE), margin


def _braking_trajectory(
    position: float, speed: float, max_deceleration: float, delay: float, horizon: float
) -> AnalyticTrajectory:
    system = linearize(ModelFamily.DOUBLE_INTEGRATOR, [position, speed], [0.0])
    if delay > 0:
        control = ControlSignal.from_pieces([(0.0, [0.0]), (delay, [-max_deceleration])])
    else:
        control = ControlSignal.constant([-max_deceleration])
    trajectory = solve_lti(system, [position, speed], control, horizon)
    return freeze_after_stop(trajectory, stopping_time(trajectory, 1), 1)


def _shared_windows(
    first: AnalyticTrajectory, second: AnalyticTrajectory, horizon: float
) -> list[tuple[float, float, int, int]]:
    """Windows on which both trajectories sit on a single segment."""
    grid = sorted({t for t in (*first.breakpoints, *second.breakpoints) if t < horizon})
    grid.append(horizon)
    windows = []
    for t_a, t_b in zip(grid, grid[1:], strict=False):
        if t_b - t_a <= TIME_SLACK:
            continue
        middle = 0.5 * (t_a + t_b)
        windows.append((t_a, t_b, first.segment_index(middle), second.segment_index(middle)))
    return windows


def _roots_in(coefficients: np.ndarray, t_a: float, t_b: float) -> list[float]:
    return [
        root
        for root in real_roots(polynomial_roots(coefficients))
        if t_a - TIME_SLACK <= root <= t_b + TIME_SLACK
    ]


def piecewise_gap_roots(
    first: AnalyticTrajectory,
    second: AnalyticTrajectory,
    component: int,
    horizon: float,
) -> list[float]:
    """Real roots of ``first[component] - second[component]`` window by window."""
    roots: list[float] = []
    for t_a, t_b, segment_i, segment_j in _shared_windows(first, second, horizon):
        difference = first.polynomial(component, segment_i) - second.polynomial(
            component, segment_j
        )
        roots.extend(_roots_in(difference.coef, t_a, t_b))
    return roots


def rcri_time_to_collision(
    v_lead: float,
    v_follow: float,
    gap: float,
    max_deceleration: float,
    reaction_time: float,
    horizon: float = DEFAULT_HORIZON,
    masses: tuple[float, float] | None = None,
) -> SsmResult:
    """Collision time when both vehicles brake at ``max_deceleration``.

    The leader brakes at once; the follower brakes after ``reaction_time``.
    Both trajectories stop rather than reverse. The gap is examined on every
    window between the reaction instant and the two stopping instants.

    Args:
        v_lead: Leader speed (m/s)
        v_follow: Follower speed (m/s)
        gap: Initial spacing S including vehicle length (m)
        max_deceleration: Braking deceleration d_m > 0 (m/s^2)
        reaction_time: Follower delay t_d >= 0 (s)
        horizon: Prediction horizon (s)
        masses: Optional (follower, leader) masses for DeltaV

    Returns:
        Collision roots; ``delta_v`` is (follower, leader) when masses are given
    """
    if not max_deceleration > 0:
        raise ValueError(f"max_deceleration must be positive, got {max_deceleration}")
    if reaction_time < 0:
        raise ValueError(f"reaction_time must be non-negative, got {reaction_time}")
    if gap <= 0:
        return SsmResult((0.0,), Method.ANALYTIC, horizon)

    leader = _braking_trajectory(gap, v_lead, max_deceleration, 0.0, horizon)
    follower = _braking_trajectory(0.0, v_follow, max_deceleration, reaction_time, horizon)
    roots = _within(piecewise_gap_roots(leader, follower, 0, horizon), horizon)

    delta = None
    if roots and masses is not None:
        t_c = roots[0]
        delta = delta_v(masses[0], masses[1], follower.component(1, t_c), leader.component(1, t_c))
    return SsmResult(roots, Method.ANALYTIC, horizon, delta)


def polynomial_roots(coefficients: Sequence[float] | np.ndarray) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix.

    Args:
        coefficients: Polynomial coefficients in ascending powers of t

    Returns:
        Complex roots (empty for constant polynomials)
    """
    c = np.asarray(coefficients, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return np.array([], dtype=complex)
    last = len(c) - 1
    while last > 0 and abs(c[last]) < LEADING_TOLERANCE * scale:
        last -= 1
    c = c[: last + 1]
    if len(c) < 2:
        return np.array([], dtype=complex)
    return np.linalg.eigvals(polycompanion(c)).astype(complex)


def real_roots(roots: np.ndarray) -> list[float]:
    """Sorted real parts of the roots whose imaginary part is negligible."""
    return sorted(
        float(root.real)
        for root in roots
        if abs(root.imag) < REAL_TOLERANCE * (1.0 + abs(root.real))
    )


def circle_gap_polynomial(
    trajectory_i: AnalyticTrajectory,
    trajectory_j: AnalyticTrajectory,
    radius_i: float,
    radius_j: float,
    *,
    segment_i: int = 0,
    segment_j: int = 0,
    components: tuple[int, int] = (0, 1),
) -> np.ndarray:
    """Coefficients (ascending) of ``dx(t)^2 + dy(t)^2 - (r_i + r_j)^2``.

    Raises:
        NonPolynomialError: If either trajectory is not polynomial in x or y
    """
    polynomials = []
    for trajectory, segment in ((trajectory_i, segment_i), (trajectory_j, segment_j)):
        piece = trajectory.segments[segment]
        if not piece.is_polynomial(components):
            raise NonPolynomialError("position components are not polynomial on this segment")
        polynomials.append([trajectory.polynomial(index, segment) for index in components])

    dx = polynomials[0][0] - polynomials[1][0]
    dy = polynomials[0][1] - polynomials[1][1]
    gap = dx * dx + dy * dy - Polynomial([(radius_i + radius_j) ** 2])
    return gap.coef


def circle_gap_roots(
    trajectory_i: AnalyticTrajectory,
    trajectory_j: AnalyticTrajectory,
    radius_i: float,
    radius_j: float,
    horizon: float,
) -> SsmResult:
    """Contact times of two circles moving on polynomial ``[x, y, ...]`` trajectories.

    Each window between the trajectories' breakpoints gets its own gap
    polynomial; the roots of all windows are merged.

    Raises:
        NonPolynomialError: If a segment is not polynomial in x or y
    """
    roots: list[float] = []
    for t_a, t_b, segment_i, segment_j in _shared_windows(trajectory_i, trajectory_j, horizon):
        coefficients = circle_gap_polynomial(
            trajectory_i,
            trajectory_j,
            radius_i,
            radius_j,
            segment_i=segment_i,
            segment_j=segment_j,
        )
        roots.extend(_roots_in(coefficients, t_a, t_b))
    return SsmResult(_within(roots, horizon), Method.ANALYTIC, horizon)


def _sample(g: Callable, grid: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(g(grid), dtype=float)
        if values.shape == grid.shape:
            return values
    except (TypeError, ValueError):
        pass
    return np.array([float(g(float(t))) for t in grid])


def bracket_scan(
    g: Callable[[float], float],
    horizon: float = DEFAULT_HORIZON,
    coarse_step: float = DEFAULT_SCAN_STEP,
    tolerance: float = ROOT_TOLERANCE,
) -> SsmResult:
    """Find every zero of ``g`` on ``[0, horizon]`` by coarse scan plus Brent refinement.

    Args:
        g: Continuous gap function (may accept arrays)
        horizon: End of the scan in seconds
        coarse_step: Bracket width in seconds
        tolerance: Brent tolerance in seconds

    Returns:
        Analytic-route result holding all zero crossings
    """
    if not coarse_step > 0:
        raise ValueError(f"coarse_step must be positive, got {coarse_step}")
    grid = np.append(np.arange(0.0, horizon, coarse_step), horizon)
    values = _sample(g, grid)

    def scalar(t: float) -> float:
        return float(np.asarray(g(t), dtype=float).reshape(-1)[0])

    roots: list[float] = []
    for k in range(len(grid)):
        if abs(values[k]) < ZERO_GAP:
            roots.append(float(grid[k]))
        elif k + 1 < len(grid) and values[k] * values[k + 1] < 0:
            roots.append(float(brentq(scalar, grid[k], grid[k + 1], xtol=tolerance)))
    return SsmResult(_within(roots, horizon), Method.ANALYTIC, horizon)


def boundary_gap(
    e_cg: Callable[[float], float], radius: float, width: float, side: int
) -> Callable[[float], float]:
    """Signed gap to a road boundary; zero when the bounding circle touches it.

    Side 1 (left): ``e_cg + r - w/2``, negative while safe.
    Side 2 (right): ``e_cg - r + w/2``, positive while safe.
    """
    if side == 1:
        return lambda t: e_cg(t) + radius - width / 2
    if side == 2:
        return lambda t: e_cg(t) - radius + width / 2
    raise ValueError(f"boundary side must be 1 or 2, got {side}")


def circle_centres(poses: np.ndarray, geometry: VehicleGeometry) -> list[tuple[np.ndarray, float]]:
    """Centres ``(k, 2)`` and radius of every bounding circle for poses ``(k, 3)``."""
    poses = np.atleast_2d(poses)
    centres = []
    for circle in geometry.circles:
        if circle.offset == 0.0:
            centre = poses[:, :2]
        else:
            centre = poses[:, :2] + circle.offset * np.column_stack(
                [np.cos(poses[:, 2]), np.sin(poses[:, 2])]
            )
        centres.append((centre, circle.radius))
    return centres


def vehicle_gap_samples(
    poses_i: np.ndarray, geometry_i: VehicleGeometry, poses_j: np.ndarray, geometry_j: VehicleGeometry
) -> np.ndarray:
    """Smallest clearance over all circle pairs, positive while apart."""
    gaps = None
    for centre_i, radius_i in circle_centres(poses_i, geometry_i):
        for centre_j, radius_j in circle_centres(poses_j, geometry_j):
            delta = centre_i - centre_j
            pair = np.hypot(delta[:, 0], delta[:, 1]) - (radius_i + radius_j)
            gaps = pair if gaps is None else np.minimum(gaps, pair)
    return gaps


def obstacle_gap_samples(
    poses: np.ndarray, geometry: VehicleGeometry, centre: Sequence[float], radius: float
) -> np.ndarray:
    """Clearance between a vehicle and a static circular obstacle."""
    gaps = None
    for circle_centre, circle_radius in circle_centres(poses, geometry):
        delta = circle_centre - np.asarray(centre, dtype=float)
        pair = np.hypot(delta[:, 0], delta[:, 1]) - (circle_radius + radius)
        gaps = pair if gaps is None else np.minimum(gaps, pair)
    return gaps


def numeric_collision_scan(gaps: np.ndarray, h: float, horizon: float | None = None) -> SsmResult:
    """Sign-change scan over gap samples taken every ``h`` seconds.

    Args:
        gaps: Clearance samples, positive while safe
        h: Sample spacing in seconds
        horizon: Reported horizon (defaults to the sampled span)

    Returns:
        Numeric-scan result; each root is linearly interpolated inside its step
    """
    gaps = np.asarray(gaps, dtype=float)
    horizon = horizon if horizon is not None else h * (len(gaps) - 1)
    if gaps[0] <= 0:
        roots = [0.0]
    else:
        roots = []
    changes = np.nonzero((gaps[:-1] > 0) != (gaps[1:] > 0))[0]
    for k in changes:
        before, after = gaps[k], gaps[k + 1]
        fraction = before / (before - after) if before != after else 0.0
        roots.append(h * (k + fraction))
    return SsmResult(_within(roots, horizon), Method.NUMERIC_SCAN, horizon)


def delta_v(mass_i: float, mass_j: float, v_i: float, v_j: float) -> tuple[float, float]:
    """Momentum-weighted velocity changes of a perfectly plastic collision.

    ``dv_i = m_j / (m_i + m_j) * (v_j - v_i)`` and ``dv_j = -(m_i / m_j) * dv_i``, so
    ``m_i dv_i + m_j dv_j`` vanishes up to rounding relative to ``|m_i dv_i|``.
    One infinite mass is allowed; the infinite side keeps its velocity.
    """
    if not (mass_i > 0 and mass_j > 0):
        raise ValueError("masses must be positive")
    if math.isinf(mass_i) and math.isinf(mass_j):
        raise ValueError("at most one mass may be infinite")
    if math.isinf(mass_j):
        return v_j - v_i, 0.0
    if math.isinf(mass_i):
        return 0.0, v_i - v_j
    dv_i = mass_j / (mass_i + mass_j) * (v_j - v_i)
    return dv_i, -(mass_i / mass_j) * dv_i
