"""Trajectory prediction by explicit Runge-Kutta integration plus closed-form helpers."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import pairwise

import numpy as np
from scipy.optimize import brentq

from src.errors import IntegrationError, ModelError
from src.lti_core import (
    TIME_SLACK,
    AnalyticTrajectory,
    ControlSignal,
    TermSegment,
    constant_segment,
)
from src.models import LongitudinalParams

logger = logging.getLogger(__name__)

# Default oracle settings
DEFAULT_STEP = 0.001  # seconds
DEFAULT_STEPS = 6000
STOP_SCAN_STEP = 0.01  # seconds, bracket width when locating v(t) = 0
DEGENERATE_SPEED = 1e-6  # m/s, below this the drag rate is treated as zero

Rhs = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit Runge-Kutta scheme.

    Attributes:
        a: Lower-triangular stage matrix, row ``i`` holds ``a_i0 .. a_i(i-1)``
        b: Stage weights
        c: Stage nodes
        order: Convergence order
    """

    a: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    order: int

    def __post_init__(self):
        stages = len(self.b)
        if len(self.a) != stages or len(self.c) != stages:
            raise ValueError("tableau rows, weights and nodes must have equal length")
        for i, row in enumerate(self.a):
            if len(row) != i:
                raise ValueError(f"row {i} of an explicit tableau needs {i} entries")
            if sum(row, Fraction(0)) != self.c[i]:
                raise ValueError(f"node c[{i}] does not equal the row sum of a")
        if sum(self.b, Fraction(0)) != 1:
            raise ValueError("weights must sum to one")

    @property
    def stages(self) -> int:
        return len(self.b)


CLASSIC_RK4 = ButcherTableau(
    a=((), (Fraction(1, 2),), (Fraction(0), Fraction(1, 2)), (Fraction(0), Fraction(0), Fraction(1))),
    b=(Fraction(1, 6), Fraction(1, 3), Fraction(1, 3), Fraction(1, 6)),
    c=(Fraction(0), Fraction(1, 2), Fraction(1, 2), Fraction(1)),
    order=4,
)


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    """States at ``t0 + l * h`` for ``l = 0 .. N``."""

    h: float
    states: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h}")
        if self.states.ndim != 2 or self.states.shape[0] < 2:
            raise ValueError("a sampled trajectory needs at least two states")

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.states.shape[0])

    @property
    def horizon(self) -> float:
        return self.h * self.n_steps

    def component(self, index: int) -> np.ndarray:
        return self.states[:, index]

    def at(self, t: float) -> np.ndarray:
        """Linearly interpolated state."""
        position = (t - self.t0) / self.h
        lower = int(np.clip(np.floor(position), 0, self.n_steps - 1))
        fraction = position - lower
        return (1.0 - fraction) * self.states[lower] + fraction * self.states[lower + 1]


def _compile(tableau: ButcherTableau) -> tuple[list[list[tuple[int, float]]], list[float]]:
    rows = [[(j, float(a)) for j, a in enumerate(row) if a != 0] for row in tableau.a]
    return rows, [float(b) for b in tableau.b]


def _is_stopped(rhs: Rhs, state: np.ndarray, u: np.ndarray, velocity_index: int) -> bool:
    return state[velocity_index] <= 0.0 and rhs(state, u)[velocity_index] <= 0.0


def _step(
    rhs: Rhs,
    state: np.ndarray,
    u: np.ndarray,
    dt: float,
    rows: list[list[tuple[int, float]]],
    weights: list[float],
    velocity_index: int | None,
) -> np.ndarray:
    if velocity_index is not None and _is_stopped(rhs, state, u, velocity_index):
        return state

    slopes: list[np.ndarray] = []
    for row in rows:
        stage = state
        for j, a in row:
            stage = stage + (dt * a) * slopes[j]
        slopes.append(rhs(stage, u))

    increment = weights[0] * slopes[0]
    for weight, slope in zip(weights[1:], slopes[1:], strict=True):
        increment = increment + weight * slope
    new_state = state + dt * increment

    if velocity_index is not None and new_state[velocity_index] < 0.0:
        # Cut the step at the interpolated stop instant and hold the speed at zero
        v_before = state[velocity_index]
        fraction = v_before / (v_before - new_state[velocity_index]) if v_before > 0 else 0.0
        new_state = state + fraction * (new_state - state)
        new_state[velocity_index] = 0.0
    return new_state


def rk4_integrate(
    rhs: Rhs,
    x0: Sequence[float] | np.ndarray,
    u: ControlSignal | Sequence[float] | np.ndarray,
    h: float = DEFAULT_STEP,
    n_steps: int = DEFAULT_STEPS,
    *,
    velocity_index: int | None = None,
    tableau: ButcherTableau = CLASSIC_RK4,
) -> SampledTrajectory:
    """Integrate ``x' = rhs(x, u(t))`` with an explicit Runge-Kutta scheme.

    Steps that contain a control switch are split at the switch so every
    sub-step sees a constant control.

    Args:
        rhs: Right-hand side ``rhs(x, u)``
        x0: Initial state
        u: Piecewise-constant control (a plain vector means constant)
        h: Step in seconds
        n_steps: Number of steps N
        velocity_index: Speed component to keep non-negative, if any
        tableau: Runge-Kutta coefficients

    Returns:
        States at every grid point ``l * h``

    Raises:
        ValueError: If ``h`` or ``n_steps`` is not positive
        IntegrationError: If a state becomes non-finite
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    if n_steps < 1:
        raise ValueError(f"need at least one step, got {n_steps}")

    signal = u if isinstance(u, ControlSignal) else ControlSignal.constant(u)
    rows, weights = _compile(tableau)
    state = np.array(x0, dtype=float)
    states = np.empty((n_steps + 1, state.shape[0]))
    states[0] = state

    single_piece = len(signal.starts) == 1
    control = signal.values[0]
    for step in range(n_steps):
        t_a = step * h
        t_b = t_a + h
        if single_piece:
            state = _step(rhs, state, control, h, rows, weights, velocity_index)
        else:
            cuts = [t_a, *signal.switch_times(t_a, t_b), t_b]
            for start, end in pairwise(cuts):
                state = _step(
                    rhs, state, signal.value_at(start), end - start, rows, weights, velocity_index
                )
        if not np.all(np.isfinite(state)):
            raise IntegrationError("non-finite state during Runge-Kutta integration", step + 1)
        states[step + 1] = state

    return SampledTrajectory(h, states)


def longitudinal_velocity_closed_form(
    v0: float,
    torque: float,
    grade: float,
    params: LongitudinalParams,
    horizon: float,
) -> AnalyticTrajectory:
    """Speed profile of the linearized force balance at constant torque and grade.

    ``v(t) = e^{rt} v0 + (e^{rt} - 1) K / r`` with ``r = -rho C_d S v0 / m`` and
    ``K = T/(m r_whl) + (rho C_d S / 2m) v0^2 - f_roll g cos(grade) - g sin(grade)``.
    For ``v0 <= 1e-6`` the zero-rate limit ``v0 + K t`` is returned.

    Raises:
        ModelError: If ``v0`` is negative
    """
    if v0 < 0:
        raise ModelError(f"longitudinal model is forward-only, got v0={v0}")
    drag = params.drag_factor
    forcing = params.acceleration(v0, torque, grade) + 2.0 * drag * v0 * v0

    if v0 <= DEGENERATE_SPEED:
        segment = TermSegment(0.0, horizon, [0, 1], [0.0, 0.0], np.array([[v0], [forcing]]))
        return AnalyticTrajectory([segment])

    rate = -2.0 * drag * v0
    segment = TermSegment(
        0.0,
        horizon,
        [0, 0],
        [rate, 0.0],
        np.array([[v0 + forcing / rate], [-forcing / rate]]),
    )
    return AnalyticTrajectory([segment])


def stopping_time(
    trajectory: AnalyticTrajectory,
    component: int = -1,
    scan_step: float = STOP_SCAN_STEP,
) -> float | None:
    """Earliest time at which the speed component reaches zero.

    Args:
        trajectory: Trajectory containing a speed component
        component: Index of the speed component
        scan_step: Bracketing resolution for non-affine segments

    Returns:
        Stopping time in seconds, or None if the speed stays positive
    """
    index = component % trajectory.n_states
    if trajectory.component(index, trajectory.t_start) <= 0.0:
        return trajectory.t_start

    for segment in trajectory.segments:
        if isinstance(segment, TermSegment) and segment.is_polynomial([index]):
            polynomial = segment.local_polynomial(index)
            if polynomial.degree() <= 1:
                start, slope = polynomial.coef[0], (
                    polynomial.coef[1] if polynomial.degree() == 1 else 0.0
                )
                if slope < 0:
                    tau = -start / slope
                    if tau <= segment.t_end - segment.t_start + TIME_SLACK:
                        return segment.t_start + max(tau, 0.0)
                continue

        def speed(t: float, piece=segment) -> float:
            return float(piece.values(np.array([t]))[0, index])

        grid = np.arange(segment.t_start, segment.t_end, scan_step)
        grid = np.append(grid, segment.t_end)
        values = segment.values(grid)[:, index]
        for k in range(len(grid) - 1):
            if values[k] > 0.0 >= values[k + 1]:
                if values[k + 1] == 0.0:
                    return float(grid[k + 1])
                return float(brentq(speed, grid[k], grid[k + 1], xtol=1e-12))
    return None


def freeze_after_stop(
    trajectory: AnalyticTrajectory,
    t_stop: float | None,
    velocity_index: int = -1,
) -> AnalyticTrajectory:
    """Hold the state constant (speed zero) from ``t_stop`` to the horizon."""
    if t_stop is None or t_stop >= trajectory.horizon - TIME_SLACK:
        return trajectory

    index = velocity_index % trajectory.n_states
    state = np.array(trajectory.evaluate(max(t_stop, trajectory.t_start)))
    state[index] = 0.0

    if t_stop <= trajectory.t_start + TIME_SLACK:
        return AnalyticTrajectory(
            [constant_segment(state, trajectory.t_start, trajectory.horizon)]
        )
    logger.debug(f"Freezing trajectory at stop time {t_stop:.4f}s")
    return trajectory.truncated(t_stop).with_tail(
        constant_segment(state, t_stop, trajectory.horizon)
    )
