"""Matrix exponentials and closed-form solutions of linear time-invariant systems.

A system ``x' = A x + B u + C`` driven by a piecewise-constant input has the
closed-form solution ``x(t) = e^{At} x0 + integral of e^{A(t-s)} (B u + C) ds``
on each constant-input interval. Solutions are kept symbolic as sums of
``c * t^p * e^{rate * t}`` terms so that callers can differentiate them, extract
polynomials and hand them to root finders.
"""

import bisect
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm

from src.errors import NumericError

logger = logging.getLogger(__name__)

# Classification thresholds
NILPOTENT_TOLERANCE = 1e-12  # relative to ||A||_inf, per power
CONDITION_LIMIT = 1e8  # eigenvector matrix condition number

# Term handling
IMAGINARY_TOLERANCE = 1e-9  # residue silently discarded below this
IMAGINARY_LIMIT = 1e-6  # residue above this (relative) is an error
RESONANCE_TOLERANCE = 1e-10  # input rate vs eigenvalue
ZERO_RATE = 1e-9  # eigenvalues below this are integrated as exact zeros
RATE_DIGITS = 12  # rounding used when merging equal (power, rate) keys

# Quadrature fallback
QUADRATURE_TOLERANCE = 1e-9
QUADRATURE_ORDER = 8
MAX_QUADRATURE_PANELS = 1024

TIME_SLACK = 1e-9


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Matrices of ``x' = A x + B u + C``.

    Attributes:
        a: State matrix (n x n)
        b: Input matrix (n x m), m may be zero
        c: Constant drift vector (n)
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"A must be a non-empty square matrix, got shape {a.shape}")
        n = a.shape[0]

        b = np.asarray(self.b, dtype=float)
        if b.size == 0:
            b = np.zeros((n, 0))
        elif b.ndim == 1:
            b = b.reshape(n, 1) if b.shape[0] == n else b
        if b.ndim != 2 or b.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {b.shape}")

        c = np.asarray(self.c, dtype=float).reshape(-1)
        if c.shape != (n,):
            raise ValueError(f"C must have length {n}, got shape {c.shape}")

        for name, matrix in (("A", a), ("B", b), ("C", c)):
            if not np.all(np.isfinite(matrix)):
                raise ValueError(f"{name} contains non-finite entries")

        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", _frozen(c))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    def rhs(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Evaluate ``A x + B u + C``."""
        x = np.asarray(x, dtype=float)
        if self.m == 0:
            return self.a @ x + self.c
        return self.a @ x + self.b @ np.asarray(u, dtype=float) + self.c

    def drive(self, u: np.ndarray) -> np.ndarray:
        """Constant forcing ``B u + C`` for a constant input."""
        if self.m == 0:
            return np.array(self.c)
        return self.b @ np.asarray(u, dtype=float).reshape(-1) + self.c


class PlanKind(Enum):
    """How the matrix exponential of a system matrix is evaluated."""

    NILPOTENT = "nilpotent"
    DIAGONALIZABLE = "diagonalizable"
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class ExpPlan:
    """Evaluation strategy for ``e^{At}`` of one matrix."""

    kind: PlanKind
    index: int | None = None
    eigenvalues: np.ndarray | None = None
    transform: np.ndarray | None = None
    transform_inv: np.ndarray | None = None


def classify_matrix(a: np.ndarray) -> ExpPlan:
    """Choose the evaluation strategy for ``e^{At}``.

    Args:
        a: Square real matrix

    Returns:
        Nilpotent plan with the smallest k such that A^k vanishes, otherwise a
        diagonalizable plan when the eigenvector matrix is well conditioned,
        otherwise the general (Pade) plan

    Raises:
        ValueError: If ``a`` is not square or has non-finite entries
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")

    n = a.shape[0]
    norm = np.linalg.norm(a, np.inf)
    if norm == 0.0:
        return ExpPlan(PlanKind.NILPOTENT, index=1)

    power = np.eye(n)
    for k in range(1, n + 1):
        power = power @ a
        if np.linalg.norm(power, np.inf) < NILPOTENT_TOLERANCE * norm:
            return ExpPlan(PlanKind.NILPOTENT, index=k)

    try:
        eigenvalues, transform = np.linalg.eig(a)
        condition = np.linalg.cond(transform)
    except np.linalg.LinAlgError:
        condition = math.inf

    if np.isfinite(condition) and condition < CONDITION_LIMIT:
        return ExpPlan(
            PlanKind.DIAGONALIZABLE,
            eigenvalues=eigenvalues,
            transform=transform,
            transform_inv=np.linalg.inv(transform),
        )

    logger.debug(f"Eigenvector condition {condition:.3e} too large, using general plan")
    return ExpPlan(PlanKind.GENERAL)


def matrix_exponential(a: np.ndarray, t: float, plan: ExpPlan | None = None) -> np.ndarray:
    """Evaluate ``e^{At}``.

    Args:
        a: Square real matrix
        t: Time in seconds
        plan: Result of ``classify_matrix(a)``; computed when omitted

    Returns:
        Real matrix ``e^{At}``
    """
    a = np.asarray(a, dtype=float)
    if plan is None:
        plan = classify_matrix(a)
    n = a.shape[0]

    if plan.kind is PlanKind.NILPOTENT:
        result = np.eye(n)
        term = np.eye(n)
        for p in range(1, plan.index):
            term = term @ a * (t / p)
            result = result + term
        return result

    if plan.kind is PlanKind.DIAGONALIZABLE:
        scaled = plan.transform * np.exp(plan.eigenvalues * t)
        result = scaled @ plan.transform_inv
        residue = np.max(np.abs(result.imag)) if n else 0.0
        if residue < IMAGINARY_TOLERANCE * max(1.0, np.max(np.abs(result.real))):
            return np.real(result)
        logger.warning(f"Imaginary residue {residue:.2e} in eigen route, falling back to Pade")

    return expm(a * t)


@dataclass(frozen=True)
class Term:
    """One ``coefficient * t^power * e^{rate * t}`` term."""

    coefficient: complex
    power: int = 0
    rate: complex = 0.0

    def __call__(self, t: float) -> complex:
        return self.coefficient * t**self.power * np.exp(self.rate * t)


class _TermCollector:
    """Accumulates vector-valued terms, merging equal (power, rate) keys."""

    def __init__(self, n: int):
        self.n = n
        self._keys: dict[tuple[int, float, float], int] = {}
        self._powers: list[int] = []
        self._rates: list[complex] = []
        self._coefficients: list[np.ndarray] = []

    def add(self, power: int, rate: complex, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=complex)
        if not np.any(vector):
            return
        rate = complex(rate)
        key = (power, round(rate.real, RATE_DIGITS), round(rate.imag, RATE_DIGITS))
        slot = self._keys.get(key)
        if slot is None:
            self._keys[key] = len(self._powers)
            self._powers.append(power)
            self._rates.append(rate)
            self._coefficients.append(vector.copy())
        else:
            self._coefficients[slot] = self._coefficients[slot] + vector

    def segment(self, t_start: float, t_end: float) -> "TermSegment":
        if not self._powers:
            return TermSegment(t_start, t_end, [0], [0.0], np.zeros((1, self.n), dtype=complex))
        return TermSegment(
            t_start, t_end, self._powers, self._rates, np.array(self._coefficients)
        )


def _as_real(values: np.ndarray) -> np.ndarray:
    imag = np.abs(values.imag)
    real = values.real
    if np.any(imag > IMAGINARY_LIMIT * (1.0 + np.abs(real))):
        raise NumericError(f"imaginary residue {np.max(imag):.3e} did not cancel")
    if np.any(imag > IMAGINARY_TOLERANCE):
        logger.debug(f"Discarding imaginary residue {np.max(imag):.3e}")
    return np.ascontiguousarray(real)


class TermSegment:
    """Closed-form piece of a trajectory on ``[t_start, t_end]``.

    Each state component is ``sum_k coefficients[k, i] * tau^powers[k] * e^{rates[k] tau}``
    with local time ``tau = t - t_start``.
    """

    def __init__(
        self,
        t_start: float,
        t_end: float,
        powers: Sequence[int],
        rates: Sequence[complex],
        coefficients: np.ndarray,
    ):
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.powers = np.asarray(powers, dtype=int)
        self.rates = np.asarray(rates, dtype=complex)
        self.coefficients = np.asarray(coefficients, dtype=complex)
        self.n_states = self.coefficients.shape[1]

    def _basis(self, tau: np.ndarray) -> np.ndarray:
        return tau[:, None] ** self.powers[None, :] * np.exp(tau[:, None] * self.rates[None, :])

    def values(self, t: np.ndarray) -> np.ndarray:
        tau = np.asarray(t, dtype=float) - self.t_start
        return _as_real(self._basis(tau) @ self.coefficients)

    def derivatives(self, t: np.ndarray) -> np.ndarray:
        tau = np.asarray(t, dtype=float) - self.t_start
        lowered = np.maximum(self.powers - 1, 0)
        power_part = np.where(
            self.powers[None, :] > 0,
            self.powers[None, :] * tau[:, None] ** lowered[None, :],
            0.0,
        )
        grown = tau[:, None] ** self.powers[None, :] * self.rates[None, :]
        basis = (power_part + grown) * np.exp(tau[:, None] * self.rates[None, :])
        return _as_real(basis @ self.coefficients)

    def is_polynomial(self, components: Iterable[int] | None = None) -> bool:
        columns = list(components) if components is not None else list(range(self.n_states))
        active = np.any(self.coefficients[:, columns] != 0, axis=1)
        return bool(np.all(self.rates[active] == 0))

    def terms(self, component: int) -> list[Term]:
        return [
            Term(complex(coefficient), int(power), complex(rate))
            for power, rate, coefficient in zip(
                self.powers, self.rates, self.coefficients[:, component], strict=True
            )
            if coefficient != 0
        ]

    def local_polynomial(self, component: int) -> Polynomial:
        if not self.is_polynomial([component]):
            raise ValueError("segment is not polynomial in this component")
        degree = int(self.powers.max()) if len(self.powers) else 0
        coefficients = np.zeros(degree + 1)
        for power, coefficient in zip(self.powers, self.coefficients[:, component], strict=True):
            coefficients[power] += coefficient.real
        return Polynomial(coefficients)

    def with_bounds(self, t_start: float, t_end: float) -> "TermSegment":
        if t_start != self.t_start:
            raise ValueError("term segments can only be cut at their end")
        return TermSegment(t_start, t_end, self.powers, self.rates, self.coefficients)

    def select(self, columns: Sequence[int]) -> "TermSegment":
        return TermSegment(
            self.t_start, self.t_end, self.powers, self.rates, self.coefficients[:, list(columns)]
        )


class NumericSegment:
    """Trajectory piece evaluated through a propagator instead of closed-form terms."""

    def __init__(
        self,
        t_start: float,
        t_end: float,
        n_states: int,
        propagate: Callable[[float], np.ndarray],
        rate_of_change: Callable[[float, np.ndarray], np.ndarray],
    ):
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.n_states = n_states
        self._propagate = propagate
        self._rate_of_change = rate_of_change

    def values(self, t: np.ndarray) -> np.ndarray:
        tau = np.asarray(t, dtype=float) - self.t_start
        return np.array([self._propagate(float(step)) for step in tau]).reshape(-1, self.n_states)

    def derivatives(self, t: np.ndarray) -> np.ndarray:
        tau = np.asarray(t, dtype=float) - self.t_start
        states = self.values(t)
        return np.array(
            [self._rate_of_change(float(step), state) for step, state in zip(tau, states, strict=True)]
        ).reshape(-1, self.n_states)

    def is_polynomial(self, components: Iterable[int] | None = None) -> bool:
        return False

    def terms(self, component: int) -> list[Term]:
        raise ValueError("numerically propagated segment has no term representation")

    def with_bounds(self, t_start: float, t_end: float) -> "NumericSegment":
        if t_start != self.t_start:
            raise ValueError("numeric segments can only be cut at their end")
        return NumericSegment(t_start, t_end, self.n_states, self._propagate, self._rate_of_change)

    def select(self, columns: Sequence[int]) -> "NumericSegment":
        columns = list(columns)
        return NumericSegment(
            self.t_start,
            self.t_end,
            len(columns),
            lambda tau: self._propagate(tau)[columns],
            lambda tau, state: self._rate_of_change(tau, self._propagate(tau))[columns],
        )


Segment = TermSegment | NumericSegment


def constant_segment(state: np.ndarray, t_start: float, t_end: float) -> TermSegment:
    """Segment holding ``state`` constant on ``[t_start, t_end]``."""
    state = np.asarray(state, dtype=float)
    return TermSegment(t_start, t_end, [0], [0.0], state.reshape(1, -1).astype(complex))


class AnalyticTrajectory:
    """Ordered, contiguous list of closed-form segments."""

    def __init__(self, segments: Sequence[Segment]):
        if not segments:
            raise ValueError("trajectory needs at least one segment")
        n_states = segments[0].n_states
        for previous, current in zip(segments, segments[1:], strict=False):
            if abs(previous.t_end - current.t_start) > TIME_SLACK:
                raise ValueError(
                    f"segments not contiguous: {previous.t_end} -> {current.t_start}"
                )
            if current.n_states != n_states:
                raise ValueError("segments disagree on state dimension")
        self.segments: tuple[Segment, ...] = tuple(segments)
        self._starts = [segment.t_start for segment in self.segments]

    @property
    def n_states(self) -> int:
        return self.segments[0].n_states

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def horizon(self) -> float:
        return self.segments[-1].t_end

    @property
    def breakpoints(self) -> list[float]:
        return [*self._starts, self.horizon]

    def _segment_index(self, t: float) -> int:
        if t < self.t_start - TIME_SLACK or t > self.horizon + TIME_SLACK:
            raise ValueError(f"t={t} outside trajectory domain [{self.t_start}, {self.horizon}]")
        return max(bisect.bisect_right(self._starts, t) - 1, 0)

    def segment_index(self, t: float) -> int:
        """Index of the segment containing ``t``."""
        return self._segment_index(t)

    def _apply(self, t, method: str) -> np.ndarray:
        times = np.asarray(t, dtype=float)
        flat = np.atleast_1d(times)
        result = np.empty((flat.size, self.n_states))
        indices = np.array([self._segment_index(float(value)) for value in flat])
        for index in np.unique(indices):
            mask = indices == index
            result[mask] = getattr(self.segments[index], method)(flat[mask])
        if times.ndim == 0:
            return result[0]
        return result

    def evaluate(self, t) -> np.ndarray:
        """State at time ``t`` (shape (n,)) or at an array of times (shape (k, n))."""
        return self._apply(t, "values")

    __call__ = evaluate

    def component(self, index: int, t) -> np.ndarray | float:
        values = self.evaluate(t)
        return values[..., index] if np.ndim(values) > 1 else float(values[index])

    def derivative(self, t) -> np.ndarray:
        """Time derivative obtained by differentiating the terms analytically."""
        return self._apply(t, "derivatives")

    def terms(self, component: int, segment: int = 0) -> list[Term]:
        return self.segments[segment].terms(component)

    def is_polynomial(self, components: Iterable[int] | None = None) -> bool:
        components = list(components) if components is not None else None
        return all(segment.is_polynomial(components) for segment in self.segments)

    def polynomial(self, component: int, segment: int = 0) -> Polynomial:
        """Polynomial in absolute time valid on one segment.

        Raises:
            ValueError: If the segment is not polynomial in ``component``
        """
        piece = self.segments[segment]
        if not isinstance(piece, TermSegment):
            raise ValueError("segment is not polynomial")
        return piece.local_polynomial(component)(Polynomial([-piece.t_start, 1.0]))

    def truncated(self, t_end: float) -> "AnalyticTrajectory":
        """Trajectory restricted to ``[t_start, t_end]``."""
        self._segment_index(t_end)
        index = max(bisect.bisect_left(self._starts, t_end) - 1, 0)
        kept = list(self.segments[:index])
        kept.append(self.segments[index].with_bounds(self.segments[index].t_start, t_end))
        return AnalyticTrajectory(kept)

    def with_tail(self, segment: Segment) -> "AnalyticTrajectory":
        return AnalyticTrajectory([*self.segments, segment])

    def select(self, columns: Sequence[int]) -> "AnalyticTrajectory":
        return AnalyticTrajectory([segment.select(columns) for segment in self.segments])

    @classmethod
    def stack(cls, *trajectories: "AnalyticTrajectory") -> "AnalyticTrajectory":
        """Concatenate the components of trajectories sharing one segment grid."""
        grid = trajectories[0].breakpoints
        for trajectory in trajectories[1:]:
            if not np.allclose(trajectory.breakpoints, grid, atol=TIME_SLACK):
                raise ValueError("cannot stack trajectories with different segment grids")

        segments: list[Segment] = []
        for pieces in zip(*(trajectory.segments for trajectory in trajectories), strict=True):
            segments.append(_stack_segments(pieces))
        return cls(segments)


def _stack_segments(pieces: Sequence[Segment]) -> Segment:
    t_start, t_end = pieces[0].t_start, pieces[0].t_end
    n_total = sum(piece.n_states for piece in pieces)

    if all(isinstance(piece, TermSegment) for piece in pieces):
        collector = _TermCollector(n_total)
        offset = 0
        for piece in pieces:
            for power, rate, row in zip(piece.powers, piece.rates, piece.coefficients, strict=True):
                vector = np.zeros(n_total, dtype=complex)
                vector[offset : offset + piece.n_states] = row
                collector.add(int(power), rate, vector)
            offset += piece.n_states
        return collector.segment(t_start, t_end)

    def propagate(tau: float) -> np.ndarray:
        return np.concatenate([piece.values(np.array([t_start + tau]))[0] for piece in pieces])

    def rate_of_change(tau: float, state: np.ndarray) -> np.ndarray:
        return np.concatenate([piece.derivatives(np.array([t_start + tau]))[0] for piece in pieces])

    return NumericSegment(t_start, t_end, n_total, propagate, rate_of_change)


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant input: ``values[k]`` holds from ``starts[k]`` to the next start."""

    starts: tuple[float, ...]
    values: tuple[np.ndarray, ...]
    end: float = math.inf

    def __post_init__(self):
        if not self.starts or len(self.starts) != len(self.values):
            raise ValueError("control signal needs matching, non-empty starts and values")
        if self.starts[0] != 0.0:
            raise ValueError("control signal must start at t=0")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:], strict=False)):
            raise ValueError("control switch times must be strictly increasing")
        values = tuple(_frozen(np.atleast_1d(value)) for value in self.values)
        dims = {value.shape for value in values}
        if len(dims) != 1:
            raise ValueError("control values must share one dimension")
        if not all(np.all(np.isfinite(value)) for value in values):
            raise ValueError("control values must be finite")
        object.__setattr__(self, "starts", tuple(float(s) for s in self.starts))
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: Sequence[float] | np.ndarray) -> "ControlSignal":
        return cls((0.0,), (np.atleast_1d(np.asarray(value, dtype=float)),))

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[float, Sequence[float]]]) -> "ControlSignal":
        ordered = sorted(pieces, key=lambda piece: piece[0])
        return cls(
            tuple(start for start, _ in ordered),
            tuple(np.asarray(value, dtype=float) for _, value in ordered),
        )

    @property
    def dim(self) -> int:
        return self.values[0].shape[0]

    def value_at(self, t: float) -> np.ndarray:
        index = max(bisect.bisect_right(self.starts, t) - 1, 0)
        return self.values[index]

    def switch_times(self, t0: float, t1: float) -> list[float]:
        """Switch instants strictly inside ``(t0, t1)``."""
        return [start for start in self.starts if t0 < start < t1]

    def intervals(self, horizon: float) -> list[tuple[float, float, np.ndarray]]:
        """Constant pieces covering ``[0, horizon]``.

        Raises:
            ValueError: If the signal ends before ``horizon``
        """
        if self.end < horizon - TIME_SLACK:
            raise ValueError(f"control defined up to {self.end}s, horizon is {horizon}s")
        bounds = [start for start in self.starts if start < horizon] + [horizon]
        return [
            (bounds[k], bounds[k + 1], self.values[k]) for k in range(len(bounds) - 1)
        ]

    def shifted(self, dt: float) -> "ControlSignal":
        """The same schedule seen from an observer whose clock starts at ``dt``."""
        current = self.value_at(dt)
        later = [(start - dt, value) for start, value in zip(self.starts, self.values, strict=True) if start > dt]
        return ControlSignal(
            (0.0, *(start for start, _ in later)),
            (current, *(value for _, value in later)),
            self.end - dt,
        )


def _as_signal(u) -> ControlSignal:
    if isinstance(u, ControlSignal):
        return u
    return ControlSignal.constant(u)


def _constant_input_segment(
    system: LtiSystem,
    plan: ExpPlan,
    x0: np.ndarray,
    forcing: np.ndarray,
    t_start: float,
    t_end: float,
) -> Segment:
    n = system.n
    collector = _TermCollector(n)

    if plan.kind is PlanKind.NILPOTENT:
        power = np.eye(n)
        previous = None
        for p in range(plan.index + 1):
            vector = np.zeros(n)
            if p < plan.index:
                vector = vector + power @ x0 / math.factorial(p)
            if previous is not None:
                vector = vector + previous @ forcing / math.factorial(p)
            collector.add(p, 0.0, vector)
            previous = power
            power = power @ system.a
        return collector.segment(t_start, t_end)

    if plan.kind is PlanKind.DIAGONALIZABLE:
        z0 = plan.transform_inv @ x0
        zw = plan.transform_inv @ forcing
        for i, rate in enumerate(plan.eigenvalues):
            column = plan.transform[:, i]
            if abs(rate) < ZERO_RATE:
                collector.add(0, 0.0, column * z0[i])
                collector.add(1, 0.0, column * zw[i])
            else:
                collector.add(0, rate, column * (z0[i] + zw[i] / rate))
                collector.add(0, 0.0, -column * zw[i] / rate)
        return collector.segment(t_start, t_end)

    # Augmented-matrix form: expm([[A, w], [0, 0]] tau) [x0; 1]
    augmented = np.zeros((n + 1, n + 1))
    augmented[:n, :n] = system.a
    augmented[:n, n] = forcing
    start = np.append(x0, 1.0)

    def propagate(tau: float) -> np.ndarray:
        return (expm(augmented * tau) @ start)[:n]

    def rate_of_change(tau: float, state: np.ndarray) -> np.ndarray:
        return system.a @ state + forcing

    logger.debug("General plan, propagating segment with Pade exponential")
    return NumericSegment(t_start, t_end, n, propagate, rate_of_change)


def solve_lti(
    system: LtiSystem,
    x0: Sequence[float] | np.ndarray,
    u: ControlSignal | Sequence[float] | np.ndarray,
    horizon: float,
    plan: ExpPlan | None = None,
) -> AnalyticTrajectory:
    """Closed-form solution for a piecewise-constant input.

    Args:
        system: Linear system
        x0: Initial state
        u: Piecewise-constant control signal (a plain vector means constant)
        horizon: End of the solution interval in seconds
        plan: Precomputed ``classify_matrix(system.a)``

    Returns:
        One closed-form segment per constant-control interval

    Raises:
        ValueError: If the horizon is not positive or the signal does not cover it
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (system.n,):
        raise ValueError(f"initial state must have length {system.n}")
    plan = plan or classify_matrix(system.a)

    segments: list[Segment] = []
    state = x0
    for t_a, t_b, value in _as_signal(u).intervals(horizon):
        segment = _constant_input_segment(system, plan, state, system.drive(value), t_a, t_b)
        segments.append(segment)
        state = segment.values(np.array([t_b]))[0]
    return AnalyticTrajectory(segments)


@dataclass(frozen=True)
class ExponentialInput:
    """Input whose channel ``j`` is the sum of ``channels[j]`` terms."""

    channels: tuple[tuple[Term, ...], ...]

    @classmethod
    def of(cls, *channels: Iterable[Term]) -> "ExponentialInput":
        return cls(tuple(tuple(channel) for channel in channels))

    @classmethod
    def from_trajectory(cls, trajectory: AnalyticTrajectory, component: int = 0) -> "ExponentialInput":
        if len(trajectory.segments) != 1 or trajectory.t_start != 0.0:
            raise ValueError("input trajectory must be a single segment starting at 0")
        return cls.of(trajectory.terms(component))

    def value(self, t: float) -> np.ndarray:
        return np.array([sum(term(t) for term in channel).real for channel in self.channels])


def _antiderivative(power: int, rate: complex) -> list[tuple[int, complex, complex]]:
    """Terms of ``integral_0^t s^power e^{rate s} ds``."""
    if abs(rate) < RESONANCE_TOLERANCE:
        return [(power + 1, 0.0, 1.0 / (power + 1))]
    terms = [
        (
            power - k,
            rate,
            (-1) ** k * math.factorial(power) / (math.factorial(power - k) * rate ** (k + 1)),
        )
        for k in range(power + 1)
    ]
    terms.append((0, 0.0, -((-1) ** power) * math.factorial(power) / rate ** (power + 1)))
    return terms


def convolve_exponential_input(
    system: LtiSystem,
    x0: Sequence[float] | np.ndarray,
    u: ExponentialInput,
    horizon: float,
    plan: ExpPlan | None = None,
) -> AnalyticTrajectory:
    """Response to an input made of ``c t^p e^{rate t}`` terms.

    Diagonalizable and nilpotent system matrices are handled in closed form,
    including inputs whose rate coincides with an eigenvalue (``t e^{rate t}``
    response). Other matrices fall back to Gauss-Legendre quadrature of the
    forced integral.

    Args:
        system: Linear system with ``m`` input channels
        x0: Initial state
        u: One term list per input channel
        horizon: End of the solution interval in seconds
        plan: Precomputed ``classify_matrix(system.a)``

    Returns:
        Single-segment trajectory on ``[0, horizon]``
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if len(u.channels) != system.m:
        raise ValueError(f"expected {system.m} input channels, got {len(u.channels)}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    plan = plan or classify_matrix(system.a)
    n = system.n

    forcing: list[tuple[int, complex, np.ndarray]] = [(0, 0.0, np.array(system.c, dtype=complex))]
    for j, channel in enumerate(u.channels):
        for term in channel:
            forcing.append((term.power, term.rate, system.b[:, j] * term.coefficient))

    collector = _TermCollector(n)

    if plan.kind is PlanKind.DIAGONALIZABLE:
        z0 = plan.transform_inv @ x0
        for i, eigenvalue in enumerate(plan.eigenvalues):
            column = plan.transform[:, i]
            collector.add(0, eigenvalue, column * z0[i])
            for power, rate, vector in forcing:
                weight = (plan.transform_inv @ vector)[i]
                if weight == 0:
                    continue
                for q, r, coefficient in _antiderivative(power, rate - eigenvalue):
                    collector.add(q, r + eigenvalue, column * weight * coefficient)
        return AnalyticTrajectory([collector.segment(0.0, horizon)])

    if plan.kind is PlanKind.NILPOTENT:
        powers = [np.eye(n)]
        for _ in range(1, plan.index):
            powers.append(powers[-1] @ system.a)
        for q, matrix in enumerate(powers):
            collector.add(q, 0.0, matrix @ x0 / math.factorial(q))
            for power, rate, vector in forcing:
                kernel = matrix @ vector / math.factorial(q)
                if not np.any(kernel):
                    continue
                for j in range(q + 1):
                    weight = math.comb(q, j) * (-1) ** j
                    for r_power, r_rate, coefficient in _antiderivative(power + j, rate):
                        collector.add(q - j + r_power, r_rate, kernel * weight * coefficient)
        return AnalyticTrajectory([collector.segment(0.0, horizon)])

    logger.warning("General system matrix, convolving input by Gauss-Legendre quadrature")
    return AnalyticTrajectory([_quadrature_segment(system, x0, u, horizon)])


def _quadrature_segment(
    system: LtiSystem, x0: np.ndarray, u: ExponentialInput, horizon: float
) -> NumericSegment:
    nodes, weights = leggauss(QUADRATURE_ORDER)

    def forcing(s: float) -> np.ndarray:
        return system.b @ u.value(s) + system.c if system.m else np.array(system.c)

    def forced(t: float, panels: int) -> np.ndarray:
        total = np.zeros(system.n)
        edges = np.linspace(0.0, t, panels + 1)
        for lo, hi in zip(edges, edges[1:], strict=False):
            half = 0.5 * (hi - lo)
            for node, weight in zip(nodes, weights, strict=True):
                s = lo + half * (node + 1.0)
                total += weight * half * (expm(system.a * (t - s)) @ forcing(s))
        return total

    def propagate(t: float) -> np.ndarray:
        free = expm(system.a * t) @ x0
        if t == 0.0:
            return free
        panels = 2
        previous = forced(t, panels)
        while panels < MAX_QUADRATURE_PANELS:
            panels *= 2
            current = forced(t, panels)
            if np.max(np.abs(current - previous)) < QUADRATURE_TOLERANCE:
                return free + current
            previous = current
        raise NumericError(f"quadrature did not settle at t={t} with {panels} panels")

    def rate_of_change(t: float, state: np.ndarray) -> np.ndarray:
        return system.a @ state + forcing(t)

    return NumericSegment(0.0, horizon, system.n, propagate, rate_of_change)
