"""Vehicle movement models and their analytic linearizations."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.errors import ModelError
from src.lti_core import LtiSystem

logger = logging.getLogger(__name__)

GRAVITY = 9.81  # m/s^2
PATH_SINGULARITY = 1e-6  # minimum |1 - e_cg * kappa|


class ModelFamily(Enum):
    """Supported movement models."""

    CONSTANT_VELOCITY = "cv1d"
    DOUBLE_INTEGRATOR = "di1d"
    BICYCLE_2D = "bicycle2d"
    LONGITUDINAL = "lon3d"
    LATERAL_PATH = "latpath"
    BICYCLE_3D = "bicycle3d"
    LATERAL_PATH_3D = "latpath3d"


STATE_LABELS: dict[ModelFamily, tuple[str, ...]] = {
    ModelFamily.CONSTANT_VELOCITY: ("p",),
    ModelFamily.DOUBLE_INTEGRATOR: ("p", "v"),
    ModelFamily.BICYCLE_2D: ("x", "y", "theta", "v"),
    ModelFamily.LONGITUDINAL: ("v",),
    ModelFamily.LATERAL_PATH: ("s", "e_cg", "theta_e"),
    ModelFamily.BICYCLE_3D: ("x", "y", "theta", "v"),
    ModelFamily.LATERAL_PATH_3D: ("s", "e_cg", "theta_e", "v"),
}

CONTROL_LABELS: dict[ModelFamily, tuple[str, ...]] = {
    ModelFamily.CONSTANT_VELOCITY: ("v",),
    ModelFamily.DOUBLE_INTEGRATOR: ("a",),
    ModelFamily.BICYCLE_2D: ("delta", "a"),
    ModelFamily.LONGITUDINAL: ("torque", "grade"),
    ModelFamily.LATERAL_PATH: ("delta", "v", "kappa"),
    ModelFamily.BICYCLE_3D: ("delta", "torque", "grade"),
    ModelFamily.LATERAL_PATH_3D: ("delta", "torque", "grade", "kappa"),
}

# Families whose speed is the last state component
VELOCITY_INDEX: dict[ModelFamily, int] = {
    ModelFamily.DOUBLE_INTEGRATOR: 1,
    ModelFamily.BICYCLE_2D: 3,
    ModelFamily.LONGITUDINAL: 0,
    ModelFamily.BICYCLE_3D: 3,
    ModelFamily.LATERAL_PATH_3D: 3,
}

PLANAR_FAMILIES = frozenset(
    {ModelFamily.BICYCLE_2D, ModelFamily.BICYCLE_3D, ModelFamily.LATERAL_PATH_3D}
)
FORCE_BALANCE_FAMILIES = frozenset(
    {ModelFamily.LONGITUDINAL, ModelFamily.BICYCLE_3D, ModelFamily.LATERAL_PATH_3D}
)


def state_index(family: ModelFamily, label: str) -> int:
    """Position of a named state component."""
    return STATE_LABELS[family].index(label)


@dataclass(frozen=True)
class LongitudinalParams:
    """Force-balance parameters of the longitudinal model."""

    mass: float
    rho: float
    drag_coefficient: float
    frontal_area: float
    wheel_radius: float
    rolling_resistance: float
    gravity: float = GRAVITY

    def __post_init__(self):
        for name in (
            "mass",
            "rho",
            "drag_coefficient",
            "frontal_area",
            "wheel_radius",
            "rolling_resistance",
            "gravity",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value}")

    @property
    def drag_factor(self) -> float:
        """rho * C_d * S / (2 m), the coefficient of v^2 in the deceleration."""
        return self.rho * self.drag_coefficient * self.frontal_area / (2.0 * self.mass)

    def acceleration(self, v: float, torque: float, grade: float) -> float:
        return (
            torque / (self.mass * self.wheel_radius)
            - self.drag_factor * v * v
            - self.rolling_resistance * math.cos(grade) * self.gravity
            - self.gravity * math.sin(grade)
        )

    def equilibrium_torque(self, v: float, grade: float = 0.0) -> float:
        """Wheel torque that holds speed ``v`` constant on ``grade``."""
        resistance = (
            0.5 * self.rho * self.drag_coefficient * self.frontal_area * v * v
            + self.rolling_resistance * self.mass * self.gravity * math.cos(grade)
            + self.mass * self.gravity * math.sin(grade)
        )
        return self.wheel_radius * resistance


@dataclass(frozen=True)
class BoundingCircle:
    """Circle centred ``offset`` metres ahead of the C.G. along the body axis."""

    offset: float
    radius: float


@dataclass(frozen=True)
class VehicleGeometry:
    """Wheelbase, footprint circles and optional mass/length."""

    wheelbase: float
    circles: tuple[BoundingCircle, ...]
    mass: float | None = None
    length: float | None = None

    def __post_init__(self):
        if not self.wheelbase > 0:
            raise ValueError(f"wheelbase must be positive, got {self.wheelbase}")
        if not self.circles:
            raise ValueError("at least one bounding circle is required")
        for circle in self.circles:
            if not circle.radius > 0:
                raise ValueError(f"circle radius must be positive, got {circle.radius}")
        if self.mass is not None and not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @classmethod
    def single(
        cls,
        wheelbase: float,
        radius: float,
        mass: float | None = None,
        length: float | None = None,
    ) -> "VehicleGeometry":
        return cls(wheelbase, (BoundingCircle(0.0, radius),), mass, length)

    @property
    def centred(self) -> bool:
        return all(circle.offset == 0.0 for circle in self.circles)

    @property
    def max_radius(self) -> float:
        return max(circle.radius for circle in self.circles)


def _check_steer(delta: float) -> None:
    if not abs(delta) < math.pi / 2:
        raise ModelError(f"steering angle {delta} outside (-pi/2, pi/2)")


def _path_denominator(e_cg: float, kappa: float) -> float:
    denominator = 1.0 - e_cg * kappa
    if abs(denominator) <= PATH_SINGULARITY:
        raise ModelError(f"path frame singular: 1 - e_cg*kappa = {denominator:.3e}")
    return denominator


def rhs_constant_velocity(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.array([float(u[0])])


def rhs_double_integrator(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.array([float(x[1]), float(u[0])])


def rhs_bicycle2d(x: np.ndarray, u: np.ndarray, wheelbase: float) -> np.ndarray:
    """Front-steer kinematic bicycle at the C.G. with zero slip angle."""
    _, _, theta, v = x
    delta, a = u
    _check_steer(delta)
    return np.array(
        [v * math.cos(theta), v * math.sin(theta), v * math.tan(delta) / wheelbase, a]
    )


def rhs_longitudinal(x: np.ndarray, u: np.ndarray, params: LongitudinalParams) -> np.ndarray:
    return np.array([params.acceleration(float(x[0]), float(u[0]), float(u[1]))])


def rhs_lateral_path(x: np.ndarray, u: np.ndarray, wheelbase: float) -> np.ndarray:
    """Lateral motion in path coordinates ``[s, e_cg, theta_e]``.

    Raises:
        ModelError: If the steering angle or path frame is singular
    """
    _, e_cg, theta_e = x
    delta, v, kappa = u
    _check_steer(delta)
    denominator = _path_denominator(e_cg, kappa)
    return np.array(
        [
            v * math.cos(theta_e) / denominator,
            v * math.sin(theta_e),
            v * (math.tan(delta) / wheelbase - kappa * math.cos(theta_e) / denominator),
        ]
    )


def rhs_bicycle3d(
    x: np.ndarray, u: np.ndarray, wheelbase: float, params: LongitudinalParams
) -> np.ndarray:
    """Planar bicycle kinematics whose speed follows the longitudinal force balance."""
    _, _, theta, v = x
    delta, torque, grade = u
    _check_steer(delta)
    return np.array(
        [
            v * math.cos(theta),
            v * math.sin(theta),
            v * math.tan(delta) / wheelbase,
            params.acceleration(v, torque, grade),
        ]
    )


def rhs_lateral_path3d(
    x: np.ndarray, u: np.ndarray, wheelbase: float, params: LongitudinalParams
) -> np.ndarray:
    s, e_cg, theta_e, v = x
    delta, torque, grade, kappa = u
    lateral = rhs_lateral_path((s, e_cg, theta_e), (delta, v, kappa), wheelbase)
    return np.append(lateral, params.acceleration(v, torque, grade))


def model_rhs(
    family: ModelFamily,
    wheelbase: float | None = None,
    params: LongitudinalParams | None = None,
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Bind model parameters into a ``rhs(x, u)`` callable."""
    _require(family, wheelbase, params)
    if family is ModelFamily.CONSTANT_VELOCITY:
        return rhs_constant_velocity
    if family is ModelFamily.DOUBLE_INTEGRATOR:
        return rhs_double_integrator
    if family is ModelFamily.BICYCLE_2D:
        return lambda x, u: rhs_bicycle2d(x, u, wheelbase)
    if family is ModelFamily.LONGITUDINAL:
        return lambda x, u: rhs_longitudinal(x, u, params)
    if family is ModelFamily.LATERAL_PATH:
        return lambda x, u: rhs_lateral_path(x, u, wheelbase)
    if family is ModelFamily.BICYCLE_3D:
        return lambda x, u: rhs_bicycle3d(x, u, wheelbase, params)
    return lambda x, u: rhs_lateral_path3d(x, u, wheelbase, params)


def _require(
    family: ModelFamily, wheelbase: float | None, params: LongitudinalParams | None
) -> None:
    if family in PLANAR_FAMILIES | {ModelFamily.LATERAL_PATH} and wheelbase is None:
        raise ValueError(f"model '{family.value}' needs a wheelbase")
    if family in FORCE_BALANCE_FAMILIES and params is None:
        raise ValueError(f"model '{family.value}' needs longitudinal parameters")


def _grade_partial(params: LongitudinalParams, grade: float) -> float:
    return params.rolling_resistance * params.gravity * math.sin(grade) - params.gravity * math.cos(
        grade
    )


def _lateral_partials(
    e_cg: float, theta_e: float, delta: float, v: float, kappa: float, wheelbase: float
) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of ``rhs_lateral_path`` w.r.t. ``[s, e, theta_e]`` and ``[delta, v, kappa]``."""
    denominator = _path_denominator(e_cg, kappa)
    cos_e, sin_e = math.cos(theta_e), math.sin(theta_e)

    a = np.array(
        [
            [0.0, v * cos_e * kappa / denominator**2, -v * sin_e / denominator],
            [0.0, 0.0, v * cos_e],
            [0.0, -v * kappa**2 * cos_e / denominator**2, v * kappa * sin_e / denominator],
        ]
    )
    b = np.array(
        [
            [0.0, cos_e / denominator, v * cos_e * e_cg / denominator**2],
            [0.0, sin_e, 0.0],
            [
                v / (wheelbase * math.cos(delta) ** 2),
                math.tan(delta) / wheelbase - kappa * cos_e / denominator,
                -v * cos_e / denominator**2,
            ],
        ]
    )
    return a, b


def jacobians(
    family: ModelFamily,
    x0: np.ndarray,
    u0: np.ndarray,
    wheelbase: float | None = None,
    params: LongitudinalParams | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``df/dx`` and ``df/du`` at an operating point."""
    _require(family, wheelbase, params)
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)

    if family is ModelFamily.CONSTANT_VELOCITY:
        return np.zeros((1, 1)), np.ones((1, 1))

    if family is ModelFamily.DOUBLE_INTEGRATOR:
        return np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]])

    if family is ModelFamily.LONGITUDINAL:
        v, grade = x0[0], u0[1]
        a = np.array([[-2.0 * params.drag_factor * v]])
        b = np.array([[1.0 / (params.mass * params.wheel_radius), _grade_partial(params, grade)]])
        return a, b

    if family is ModelFamily.LATERAL_PATH:
        _check_steer(u0[0])
        return _lateral_partials(x0[1], x0[2], u0[0], u0[1], u0[2], wheelbase)

    if family in (ModelFamily.BICYCLE_2D, ModelFamily.BICYCLE_3D):
        _, _, theta, v = x0
        delta = u0[0]
        _check_steer(delta)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        a = np.zeros((4, 4))
        a[0, 2], a[0, 3] = -v * sin_t, cos_t
        a[1, 2], a[1, 3] = v * cos_t, sin_t
        a[2, 3] = math.tan(delta) / wheelbase
        steer = v / (wheelbase * math.cos(delta) ** 2)
        if family is ModelFamily.BICYCLE_2D:
            b = np.array([[0.0, 0.0], [0.0, 0.0], [steer, 0.0], [0.0, 1.0]])
            return a, b
        a[3, 3] = -2.0 * params.drag_factor * v
        b = np.zeros((4, 3))
        b[2, 0] = steer
        b[3, 1] = 1.0 / (params.mass * params.wheel_radius)
        b[3, 2] = _grade_partial(params, u0[2])
        return a, b

    # LATERAL_PATH_3D: [s, e, theta_e, v] with controls [delta, torque, grade, kappa]
    _, e_cg, theta_e, v = x0
    delta, _, grade, kappa = u0
    _check_steer(delta)
    lateral_a, lateral_b = _lateral_partials(e_cg, theta_e, delta, v, kappa, wheelbase)
    a = np.zeros((4, 4))
    a[:3, :3] = lateral_a
    a[:3, 3] = lateral_b[:, 1]
    a[3, 3] = -2.0 * params.drag_factor * v
    b = np.zeros((4, 4))
    b[:3, 0] = lateral_b[:, 0]
    b[:3, 3] = lateral_b[:, 2]
    b[3, 1] = 1.0 / (params.mass * params.wheel_radius)
    b[3, 2] = _grade_partial(params, grade)
    return a, b


def linearize(
    family: ModelFamily,
    x0: np.ndarray,
    u0: np.ndarray,
    *,
    wheelbase: float | None = None,
    params: LongitudinalParams | None = None,
    frozen_control: bool = False,
) -> LtiSystem:
    """First-order Taylor model ``x' = A x + B u + C`` around ``(x0, u0)``.

    Args:
        family: Model to linearize
        x0: Operating-point state
        u0: Operating-point control
        wheelbase: Wheelbase for steering models
        params: Longitudinal parameters for force-balance models
        frozen_control: Fold ``B u0`` into ``C`` and zero ``B`` (control held at ``u0``)

    Returns:
        Linear system passing exactly through ``f(x0, u0)`` at the operating point

    Raises:
        ModelError: If the operating point violates a model guard
    """
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    a, b = jacobians(family, x0, u0, wheelbase, params)
    f0 = model_rhs(family, wheelbase, params)(x0, u0)

    if frozen_control:
        return LtiSystem(a, np.zeros_like(b), f0 - a @ x0)
    return LtiSystem(a, b, f0 - a @ x0 - b @ u0)


def linearize_planar_speed_input(
    pose0: np.ndarray, v0: float, delta0: float, wheelbase: float
) -> LtiSystem:
    """Planar kinematics ``[x, y, theta]`` with speed as the only input channel.

    The steering angle is held at ``delta0``. Used to feed a closed-form speed
    profile into the position prediction.
    """
    _check_steer(delta0)
    _, _, theta = pose0
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    curvature = math.tan(delta0) / wheelbase
    a = np.array([[0.0, 0.0, -v0 * sin_t], [0.0, 0.0, v0 * cos_t], [0.0, 0.0, 0.0]])
    b = np.array([[cos_t], [sin_t], [curvature]])
    f0 = np.array([v0 * cos_t, v0 * sin_t, v0 * curvature])
    pose0 = np.asarray(pose0, dtype=float)
    return LtiSystem(a, b, f0 - a @ pose0 - b[:, 0] * v0)
