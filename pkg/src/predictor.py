"""Per-vehicle predictions and dispatch of collision queries to the solvers."""

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from src.collision import (
    DEFAULT_HORIZON,
    DEFAULT_SCAN_STEP,
    CollisionQuery,
    EvaluationMethod,
    Measure,
    Method,
    QueryKind,
    RcriFlag,
    SsmResult,
    boundary_gap,
    bracket_scan,
    circle_gap_roots,
    delta_v,
    numeric_collision_scan,
    obstacle_gap_samples,
    rcri_flag,
    rcri_time_to_collision,
    ttc,
    vehicle_gap_samples,
)
from src.errors import ModelError
from src.frenet import RoadGeometry, cartesian_to_path, path_to_cartesian
from src.lti_core import (
    AnalyticTrajectory,
    ControlSignal,
    ExponentialInput,
    NumericSegment,
    Segment,
    Term,
    TermSegment,
    constant_segment,
    convolve_exponential_input,
    solve_lti,
)
from src.models import (
    CONTROL_LABELS,
    FORCE_BALANCE_FAMILIES,
    STATE_LABELS,
    VELOCITY_INDEX,
    LongitudinalParams,
    ModelFamily,
    VehicleGeometry,
    linearize,
    linearize_planar_speed_input,
    model_rhs,
)
from src.refinement import RefinementPolicy
from src.trajectory import (
    DEFAULT_STEP,
    DEFAULT_STEPS,
    SampledTrajectory,
    freeze_after_stop,
    longitudinal_velocity_closed_form,
    rk4_integrate,
    stopping_time,
)

logger = logging.getLogger(__name__)

ONE_DIMENSIONAL = frozenset({ModelFamily.CONSTANT_VELOCITY, ModelFamily.DOUBLE_INTEGRATOR})
CARTESIAN_PLANAR = frozenset({ModelFamily.BICYCLE_2D, ModelFamily.BICYCLE_3D})
PATH_FAMILIES = frozenset({ModelFamily.LATERAL_PATH, ModelFamily.LATERAL_PATH_3D})

# Families that can take part in geometric (circle) queries
POSITIONED_FAMILIES = ONE_DIMENSIONAL | CARTESIAN_PLANAR | PATH_FAMILIES
# Families with a lateral offset, usable in boundary queries
LATERAL_FAMILIES = CARTESIAN_PLANAR | PATH_FAMILIES

VIEW_STEP = 1e-6  # seconds, central difference for path-to-Cartesian views


@dataclass(frozen=True)
class VehicleState:
    """A vehicle at one instant, with the control held for prediction."""

    vehicle_id: str
    family: ModelFamily
    state: tuple[float, ...]
    control: tuple[float, ...]
    geometry: VehicleGeometry
    longitudinal: LongitudinalParams | None = None

    def __post_init__(self):
        state = tuple(float(value) for value in self.state)
        control = tuple(float(value) for value in self.control)
        if len(state) != len(STATE_LABELS[self.family]):
            raise ValueError(
                f"vehicle '{self.vehicle_id}': model '{self.family.value}' needs "
                f"{len(STATE_LABELS[self.family])} state entries, got {len(state)}"
            )
        if len(control) != len(CONTROL_LABELS[self.family]):
            raise ValueError(
                f"vehicle '{self.vehicle_id}': model '{self.family.value}' needs "
                f"{len(CONTROL_LABELS[self.family])} control entries, got {len(control)}"
            )
        if self.family in FORCE_BALANCE_FAMILIES and self.longitudinal is None:
            raise ValueError(f"vehicle '{self.vehicle_id}' needs longitudinal parameters")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "control", control)

    @property
    def x(self) -> np.ndarray:
        return np.array(self.state)

    @property
    def u(self) -> np.ndarray:
        return np.array(self.control)

    def rhs(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        return model_rhs(self.family, self.geometry.wheelbase, self.longitudinal)

    def moved(self, state: np.ndarray, control: np.ndarray) -> "VehicleState":
        return replace(self, state=tuple(state), control=tuple(control))


@dataclass(frozen=True)
class ObstacleState:
    """Static circular obstacle."""

    obstacle_id: str
    centre: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"obstacle '{self.obstacle_id}' radius must be positive")


@dataclass(frozen=True)
class PredictionSettings:
    """Horizons and resolutions of the analytic and numeric routes.

    Attributes:
        horizon: Analytic prediction horizon (s)
        scan_step: Coarse bracket width of ``bracket_scan`` (s)
        oracle_step: RK4 step of the numeric route (s)
        oracle_steps: Number of RK4 steps of the numeric route
    """

    horizon: float = DEFAULT_HORIZON
    scan_step: float = DEFAULT_SCAN_STEP
    oracle_step: float = DEFAULT_STEP
    oracle_steps: int = DEFAULT_STEPS

    def __post_init__(self):
        for name in ("horizon", "scan_step", "oracle_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.oracle_steps < 1:
            raise ValueError(f"oracle_steps must be at least 1, got {self.oracle_steps}")

    @property
    def oracle_horizon(self) -> float:
        return self.oracle_step * self.oracle_steps


@dataclass(frozen=True)
class WorldSnapshot:
    """Everything a query needs at one evaluation time."""

    time: float
    vehicles: Mapping[str, VehicleState]
    obstacles: Mapping[str, ObstacleState] = field(default_factory=dict)
    road: RoadGeometry | None = None
    settings: PredictionSettings = field(default_factory=PredictionSettings)


@dataclass(frozen=True)
class Evaluation:
    """Outcome of one query at one evaluation time.

    Attributes:
        query_id: Query identifier
        time: Evaluation time T_r (s)
        analytic: Result of the analytic route, if requested
        numeric: Result of the numeric route, if requested
        rcri: RCRI flag and final spacing margin for RCRI queries
    """

    query_id: str
    time: float
    analytic: SsmResult | None = None
    numeric: SsmResult | None = None
    rcri: tuple[RcriFlag, float] | None = None

    @property
    def result(self) -> SsmResult:
        return self.analytic if self.analytic is not None else self.numeric

    @property
    def error(self) -> float | None:
        """|analytic t_c* - numeric t_c*| when both routes predict a collision."""
        if self.analytic is None or self.numeric is None:
            return None
        if self.analytic.t_c_star is None or self.numeric.t_c_star is None:
            return None
        return abs(self.analytic.t_c_star - self.numeric.t_c_star)


def speed_profile(vehicle: VehicleState, horizon: float) -> AnalyticTrajectory:
    """Closed-form speed of a vehicle with its control held constant."""
    family = vehicle.family
    if family is ModelFamily.BICYCLE_2D:
        v0, acceleration = vehicle.state[3], vehicle.control[1]
        segment = TermSegment(0.0, horizon, [0, 1], [0.0, 0.0], np.array([[v0], [acceleration]]))
        return AnalyticTrajectory([segment])
    if family is ModelFamily.LONGITUDINAL:
        v0, torque, grade = vehicle.state[0], vehicle.control[0], vehicle.control[1]
    elif family in (ModelFamily.BICYCLE_3D, ModelFamily.LATERAL_PATH_3D):
        v0, torque, grade = vehicle.state[3], vehicle.control[1], vehicle.control[2]
    else:
        raise ValueError(f"model '{family.value}' has no speed state")
    return longitudinal_velocity_closed_form(v0, torque, grade, vehicle.longitudinal, horizon)


def _hold_at_stop(trajectory: AnalyticTrajectory, index: int) -> AnalyticTrajectory:
    start = trajectory.t_start
    if trajectory.component(index, start) <= 0.0 and trajectory.derivative(start)[index] > 0.0:
        # Pulling away from rest
        return trajectory
    return freeze_after_stop(trajectory, stopping_time(trajectory, index), index)


def _path_cascade(
    path_state: np.ndarray,
    delta: float,
    kappa: float,
    speed: AnalyticTrajectory,
    wheelbase: float,
    horizon: float,
) -> AnalyticTrajectory:
    """``[s, e_cg, theta_e, v]`` with the closed-form speed fed into the lateral linearization."""
    v0 = float(speed.component(0, 0.0))
    system = linearize(
        ModelFamily.LATERAL_PATH, path_state, [delta, v0, kappa], wheelbase=wheelbase
    )
    inputs = ExponentialInput.of([Term(delta)], speed.terms(0), [Term(kappa)])
    lateral = convolve_exponential_input(system, path_state, inputs, horizon)
    return _hold_at_stop(AnalyticTrajectory.stack(lateral, speed), 3)


def predict_analytic(vehicle: VehicleState, horizon: float) -> AnalyticTrajectory:
    """Closed-form prediction in the vehicle's own state coordinates.

    The model is linearized at the current state and control; speed states
    are frozen once they reach zero.
    """
    family = vehicle.family
    x0, u0 = vehicle.x, vehicle.u
    wheelbase = vehicle.geometry.wheelbase

    if family is ModelFamily.LONGITUDINAL:
        return _hold_at_stop(speed_profile(vehicle, horizon), 0)

    if family is ModelFamily.BICYCLE_3D:
        speed = speed_profile(vehicle, horizon)
        system = linearize_planar_speed_input(x0[:3], x0[3], u0[0], wheelbase)
        pose = convolve_exponential_input(
            system, x0[:3], ExponentialInput.of(speed.terms(0)), horizon
        )
        return _hold_at_stop(AnalyticTrajectory.stack(pose, speed), 3)

    if family is ModelFamily.LATERAL_PATH_3D:
        return _path_cascade(
            x0[:3], u0[0], u0[3], speed_profile(vehicle, horizon), wheelbase, horizon
        )

    system = linearize(family, x0, u0, wheelbase=wheelbase, params=vehicle.longitudinal)
    trajectory = solve_lti(system, x0, ControlSignal.constant(u0), horizon)
    if family in VELOCITY_INDEX:
        trajectory = _hold_at_stop(trajectory, VELOCITY_INDEX[family])
    return trajectory


def predict_path(
    vehicle: VehicleState, horizon: float, road: RoadGeometry | None
) -> AnalyticTrajectory:
    """Closed-form prediction whose first three components are ``[s, e_cg, theta_e]``."""
    family = vehicle.family
    if family in PATH_FAMILIES:
        return predict_analytic(vehicle, horizon)
    if family not in CARTESIAN_PLANAR:
        raise ValueError(f"model '{family.value}' has no lateral offset")
    if road is None:
        raise ValueError("path-frame prediction needs a road")
    x, y, theta, _ = vehicle.state
    path_state = np.array(cartesian_to_path(x, y, theta, road))
    return _path_cascade(
        path_state,
        vehicle.control[0],
        road.curvature_at(path_state[0]),
        speed_profile(vehicle, horizon),
        vehicle.geometry.wheelbase,
        horizon,
    )


def _zero_columns(trajectory: AnalyticTrajectory, count: int) -> AnalyticTrajectory:
    return AnalyticTrajectory(
        [constant_segment(np.zeros(count), piece.t_start, piece.t_end) for piece in trajectory.segments]
    )


def _cartesian_segment(piece: Segment, road: RoadGeometry) -> NumericSegment:
    def propagate(tau: float) -> np.ndarray:
        s, e_cg, theta_e = piece.values(np.array([piece.t_start + tau]))[0, :3]
        return np.array(path_to_cartesian(s, e_cg, theta_e, road))

    def rate_of_change(tau: float, state: np.ndarray) -> np.ndarray:
        return (propagate(tau + VIEW_STEP) - propagate(tau - VIEW_STEP)) / (2.0 * VIEW_STEP)

    return NumericSegment(piece.t_start, piece.t_end, 3, propagate, rate_of_change)


def planar_view(
    vehicle: VehicleState, trajectory: AnalyticTrajectory, road: RoadGeometry | None
) -> AnalyticTrajectory:
    """``[x, y, theta]`` of a native prediction."""
    family = vehicle.family
    if family in CARTESIAN_PLANAR:
        return trajectory.select([0, 1, 2])
    if family in ONE_DIMENSIONAL:
        return AnalyticTrajectory.stack(trajectory.select([0]), _zero_columns(trajectory, 2))
    if family in PATH_FAMILIES:
        if road is None:
            raise ValueError("path-coordinate vehicles need a road")
        return AnalyticTrajectory([_cartesian_segment(piece, road) for piece in trajectory.segments])
    raise ValueError(f"model '{family.value}' has no position")


def sampled_poses(
    vehicle: VehicleState, states: np.ndarray, road: RoadGeometry | None
) -> np.ndarray:
    """``[x, y, theta]`` rows for states sampled in the vehicle's own coordinates."""
    states = np.atleast_2d(states)
    family = vehicle.family
    if family in CARTESIAN_PLANAR:
        return states[:, :3]
    if family in ONE_DIMENSIONAL:
        zeros = np.zeros(len(states))
        return np.column_stack([states[:, 0], zeros, zeros])
    if family in PATH_FAMILIES:
        if road is None:
            raise ValueError("path-coordinate vehicles need a road")
        return np.array([path_to_cartesian(*row[:3], road) for row in states])
    raise ValueError(f"model '{family.value}' has no position")


def sampled_path_states(
    vehicle: VehicleState, states: np.ndarray, road: RoadGeometry | None
) -> np.ndarray:
    """``[s, e_cg, theta_e]`` rows for sampled states."""
    states = np.atleast_2d(states)
    if vehicle.family in PATH_FAMILIES:
        return states[:, :3]
    if vehicle.family not in CARTESIAN_PLANAR:
        raise ValueError(f"model '{vehicle.family.value}' has no lateral offset")
    if road is None:
        raise ValueError("path-frame prediction needs a road")
    return np.array([cartesian_to_path(*row[:3], road) for row in states])


def velocity_vector(
    vehicle: VehicleState, state: np.ndarray, road: RoadGeometry | None
) -> np.ndarray:
    """Cartesian velocity of the C.G. for a state in the vehicle's own coordinates.

    Raises:
        ModelError: If a path-coordinate vehicle has no road to follow
    """
    family = vehicle.family
    if family is ModelFamily.CONSTANT_VELOCITY:
        return np.array([vehicle.control[0], 0.0])
    if family is ModelFamily.DOUBLE_INTEGRATOR:
        return np.array([state[1], 0.0])
    if family in CARTESIAN_PLANAR:
        return state[3] * np.array([math.cos(state[2]), math.sin(state[2])])
    if family in PATH_FAMILIES:
        if road is None:
            raise ModelError(f"model '{family.value}' needs a road to report a velocity")
        speed = vehicle.control[1] if family is ModelFamily.LATERAL_PATH else state[3]
        heading = road.path.heading_at(state[0]) + state[2]
        return speed * np.array([math.cos(heading), math.sin(heading)])
    raise ValueError(f"model '{family.value}' has no planar velocity")


def boundary_clearance(
    lateral: Callable, geometry: VehicleGeometry, road: RoadGeometry, side: int
) -> Callable:
    """Clearance to one road boundary, positive while safe, minimum over bounding circles.

    Args:
        lateral: Maps a time (or sample index) array to rows starting ``[s, e_cg, theta_e]``
        geometry: Vehicle footprint
        road: Road whose boundary is checked
        side: 1 (left, +w/2) or 2 (right, -w/2)
    """
    orientation = -1.0 if side == 1 else 1.0
    gaps = []
    for circle in geometry.circles:

        def circle_offset(t, offset=circle.offset):
            rows = np.atleast_2d(lateral(t))
            return rows[:, 1] + offset * np.sin(rows[:, 2])

        gaps.append(boundary_gap(circle_offset, circle.radius, road.width, side))
    return lambda t: np.min([orientation * gap(t) for gap in gaps], axis=0)


class CollisionEvaluator:
    """Evaluates collision queries against one world snapshot.

    Predictions are computed once per vehicle and shared by all queries.
    """

    def __init__(self, snapshot: WorldSnapshot, refinement: RefinementPolicy | None = None):
        self.snapshot = snapshot
        self.settings = snapshot.settings
        self.refinement = refinement or RefinementPolicy()
        self._native: dict[str, AnalyticTrajectory] = {}
        self._planar: dict[str, AnalyticTrajectory] = {}
        self._path: dict[str, AnalyticTrajectory] = {}
        self._sampled: dict[str, SampledTrajectory] = {}
        self._sampled_path: dict[str, np.ndarray] = {}

    def _vehicle(self, vehicle_id: str) -> VehicleState:
        try:
            return self.snapshot.vehicles[vehicle_id]
        except KeyError:
            raise ValueError(f"unknown vehicle '{vehicle_id}'") from None

    def _obstacle(self, obstacle_id: str) -> ObstacleState:
        try:
            return self.snapshot.obstacles[obstacle_id]
        except KeyError:
            raise ValueError(f"unknown obstacle '{obstacle_id}'") from None

    # Predictions

    def native_prediction(self, vehicle_id: str) -> AnalyticTrajectory:
        if vehicle_id not in self._native:
            self._native[vehicle_id] = predict_analytic(
                self._vehicle(vehicle_id), self.settings.horizon
            )
        return self._native[vehicle_id]

    def planar_prediction(self, vehicle_id: str) -> AnalyticTrajectory:
        if vehicle_id not in self._planar:
            self._planar[vehicle_id] = planar_view(
                self._vehicle(vehicle_id), self.native_prediction(vehicle_id), self.snapshot.road
            )
        return self._planar[vehicle_id]

    def path_prediction(self, vehicle_id: str) -> AnalyticTrajectory:
        if vehicle_id not in self._path:
            vehicle = self._vehicle(vehicle_id)
            if vehicle.family in PATH_FAMILIES:
                self._path[vehicle_id] = self.native_prediction(vehicle_id)
            else:
                self._path[vehicle_id] = predict_path(
                    vehicle, self.settings.horizon, self.snapshot.road
                )
        return self._path[vehicle_id]

    def sampled_prediction(self, vehicle_id: str) -> SampledTrajectory:
        """RK4 prediction of the full model, sampled every ``oracle_step``."""
        if vehicle_id not in self._sampled:
            vehicle = self._vehicle(vehicle_id)
            rhs = vehicle.rhs()
            velocity_index = VELOCITY_INDEX.get(vehicle.family)

            def integrate(h: float, n_steps: int) -> SampledTrajectory:
                return rk4_integrate(
                    rhs, vehicle.x, vehicle.u, h, n_steps, velocity_index=velocity_index
                )

            sampled = self.refinement.integrate(
                integrate,
                self.settings.oracle_step,
                self.settings.oracle_steps,
                label=f"vehicle '{vehicle_id}'",
            )
            stride = round(self.settings.oracle_step / sampled.h)
            if stride > 1:
                sampled = SampledTrajectory(self.settings.oracle_step, sampled.states[::stride])
            self._sampled[vehicle_id] = sampled
        return self._sampled[vehicle_id]

    # Dispatch

    def evaluate(
        self, query: CollisionQuery, method: EvaluationMethod = EvaluationMethod.BOTH
    ) -> Evaluation:
        """Run the requested routes for one query."""
        analytic = self._analytic(query) if method.wants_analytic else None
        numeric = self._numeric(query) if method.wants_numeric else None
        rcri = self._rcri_flag(query) if query.measure is Measure.RCRI else None
        evaluation = Evaluation(query.query_id, self.snapshot.time, analytic, numeric, rcri)
        logger.debug(
            f"T_r={self.snapshot.time:.3f}s query '{query.query_id}': "
            f"analytic={analytic.t_c_star if analytic else None} "
            f"numeric={numeric.t_c_star if numeric else None}"
        )
        return evaluation

    def _analytic(self, query: CollisionQuery) -> SsmResult:
        if query.kind is QueryKind.VEHICLE_BOUNDARY:
            return self._analytic_boundary(query)
        if query.kind is QueryKind.VEHICLE_OBSTACLE:
            return self._analytic_obstacle(query)
        if query.measure is Measure.TTC:
            return self._axis_ttc(query)
        if query.measure is Measure.RCRI:
            return self._axis_rcri(query)
        return self._analytic_pair(query)

    def _numeric(self, query: CollisionQuery) -> SsmResult:
        ego = self._vehicle(query.ego)
        h = self.settings.oracle_step
        horizon = self.settings.oracle_horizon
        states = self.sampled_prediction(query.ego).states
        road = self.snapshot.road

        if query.kind is QueryKind.VEHICLE_BOUNDARY:
            if query.ego not in self._sampled_path:
                self._sampled_path[query.ego] = sampled_path_states(ego, states, road)
            rows = self._sampled_path[query.ego]
            clearance = boundary_clearance(lambda index: rows[index], ego.geometry, road, query.side)
            return numeric_collision_scan(clearance(np.arange(len(rows))), h, horizon)

        poses = sampled_poses(ego, states, road)
        if query.kind is QueryKind.VEHICLE_OBSTACLE:
            obstacle = self._obstacle(query.target)
            gaps = obstacle_gap_samples(poses, ego.geometry, obstacle.centre, obstacle.radius)
            return numeric_collision_scan(gaps, h, horizon)

        other = self._vehicle(query.target)
        other_sampled = self.sampled_prediction(query.target)
        other_poses = sampled_poses(other, other_sampled.states, road)
        gaps = vehicle_gap_samples(poses, ego.geometry, other_poses, other.geometry)
        result = numeric_collision_scan(gaps, h, horizon)
        if result.t_c_star is None:
            return result
        t_c = result.t_c_star
        sampled = self.sampled_prediction(query.ego)
        return self._with_delta_v(
            result,
            ego,
            other,
            sampled.at(t_c),
            other_sampled.at(t_c),
            sampled_poses(ego, sampled.at(t_c), road)[0],
            sampled_poses(other, other_sampled.at(t_c), road)[0],
        )

    # Analytic routes

    def _analytic_pair(self, query: CollisionQuery) -> SsmResult:
        ego, other = self._vehicle(query.ego), self._vehicle(query.target)
        view_i = self.planar_prediction(query.ego)
        view_j = self.planar_prediction(query.target)
        horizon = self.settings.horizon

        def gap(t):
            return vehicle_gap_samples(view_i(t), ego.geometry, view_j(t), other.geometry)

        if gap(0.0)[0] <= 0.0:
            result = SsmResult((0.0,), Method.ANALYTIC, horizon)
        elif (
            ego.geometry.centred
            and other.geometry.centred
            and view_i.is_polynomial([0, 1])
            and view_j.is_polynomial([0, 1])
        ):
            logger.debug(f"Query '{query.query_id}': polynomial gap route")
            result = circle_gap_roots(
                view_i, view_j, ego.geometry.max_radius, other.geometry.max_radius, horizon
            )
        else:
            logger.debug(f"Query '{query.query_id}': bracket scan route")
            result = bracket_scan(gap, horizon, self.settings.scan_step)

        if result.t_c_star is None:
            return result
        t_c = result.t_c_star
        return self._with_delta_v(
            result,
            ego,
            other,
            self.native_prediction(query.ego)(t_c),
            self.native_prediction(query.target)(t_c),
            view_i(t_c),
            view_j(t_c),
        )

    def _analytic_obstacle(self, query: CollisionQuery) -> SsmResult:
        ego = self._vehicle(query.ego)
        obstacle = self._obstacle(query.target)
        view = self.planar_prediction(query.ego)
        horizon = self.settings.horizon

        def gap(t):
            return obstacle_gap_samples(view(t), ego.geometry, obstacle.centre, obstacle.radius)

        if gap(0.0)[0] <= 0.0:
            return SsmResult((0.0,), Method.ANALYTIC, horizon)
        if ego.geometry.centred and view.is_polynomial([0, 1]):
            centre = np.array([obstacle.centre[0], obstacle.centre[1], 0.0])
            fixed = AnalyticTrajectory([constant_segment(centre, 0.0, horizon)])
            return circle_gap_roots(
                view, fixed, ego.geometry.max_radius, obstacle.radius, horizon
            )
        return bracket_scan(gap, horizon, self.settings.scan_step)

    def _analytic_boundary(self, query: CollisionQuery) -> SsmResult:
        ego = self._vehicle(query.ego)
        path = self.path_prediction(query.ego)
        horizon = self.settings.horizon
        clearance = boundary_clearance(path, ego.geometry, self.snapshot.road, query.side)
        if clearance(0.0)[0] <= 0.0:
            return SsmResult((0.0,), Method.ANALYTIC, horizon)
        return bracket_scan(clearance, horizon, self.settings.scan_step)

    # One-dimensional measures

    def _axis_state(self, vehicle: VehicleState, axis: str) -> tuple[float, float]:
        """Position and velocity of the C.G. along ``axis`` at the current instant."""
        column = 0 if axis == "x" else 1
        pose = sampled_poses(vehicle, vehicle.x, self.snapshot.road)[0]
        velocity = velocity_vector(vehicle, vehicle.x, self.snapshot.road)
        return float(pose[column]), float(velocity[column])

    def _axis_pair(self, query: CollisionQuery) -> tuple[float, float, float, float]:
        """Spacing net of both radii and the speeds of (ego, target) toward each other's side."""
        ego, other = self._vehicle(query.ego), self._vehicle(query.target)
        p_ego, v_ego = self._axis_state(ego, query.axis)
        p_other, v_other = self._axis_state(other, query.axis)
        direction = 1.0 if p_other >= p_ego else -1.0
        length = ego.geometry.max_radius + other.geometry.max_radius
        return direction * (p_other - p_ego), length, direction * v_ego, direction * v_other

    def _axis_ttc(self, query: CollisionQuery) -> SsmResult:
        distance, length, v_ego, v_other = self._axis_pair(query)
        return ttc(distance, 0.0, v_other, v_ego, length, self.settings.horizon)

    def _axis_rcri(self, query: CollisionQuery) -> SsmResult:
        ego, other = self._vehicle(query.ego), self._vehicle(query.target)
        distance, length, v_ego, v_other = self._axis_pair(query)
        masses = None
        if ego.geometry.mass is not None and other.geometry.mass is not None:
            masses = (ego.geometry.mass, other.geometry.mass)
        return rcri_time_to_collision(
            max(v_other, 0.0),
            max(v_ego, 0.0),
            distance - length,
            query.max_deceleration,
            query.reaction_time,
            self.settings.horizon,
            masses,
        )

    def _rcri_flag(self, query: CollisionQuery) -> tuple[RcriFlag, float]:
        distance, length, v_ego, v_other = self._axis_pair(query)
        return rcri_flag(
            max(v_other, 0.0),
            max(v_ego, 0.0),
            distance - length,
            query.max_deceleration,
            query.reaction_time,
        )

    def _with_delta_v(
        self,
        result: SsmResult,
        ego: VehicleState,
        other: VehicleState,
        state_i: np.ndarray,
        state_j: np.ndarray,
        pose_i: np.ndarray,
        pose_j: np.ndarray,
    ) -> SsmResult:
        """Attach DeltaV along the line of centres when both masses are known."""
        if ego.geometry.mass is None or other.geometry.mass is None:
            return result
        road = self.snapshot.road
        line = np.asarray(pose_j[:2], dtype=float) - np.asarray(pose_i[:2], dtype=float)
        norm = float(np.hypot(line[0], line[1]))
        line = line / norm if norm > 0 else np.array([1.0, 0.0])
        v_i = float(velocity_vector(ego, state_i, road) @ line)
        v_j = float(velocity_vector(other, state_j, road) @ line)
        return replace(result, delta_v=delta_v(ego.geometry.mass, other.geometry.mass, v_i, v_j))


def earliest_collision(
    snapshot: WorldSnapshot,
    query: CollisionQuery,
    method: EvaluationMethod = EvaluationMethod.BOTH,
) -> Evaluation:
    """Evaluate one query on a snapshot.

    ``Evaluation.result`` is the analytic result (analytic and both modes) or
    the numeric one; ``Evaluation.error`` is e_tc* in both mode.
    """
    return CollisionEvaluator(snapshot).evaluate(query, method)
