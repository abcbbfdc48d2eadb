"""Acceptance checks on the bundled experiments, run by ``ssmkit verify``."""

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass

from src.errors import AcceptanceFailure
from src.models import ModelFamily
from src.runner import RunRecord, run
from src.scenario import Scenario, bundled_scenario

logger = logging.getLogger(__name__)

# Error bounds on e_tc* at T_r = 0
CONVERGING_INITIAL_ERROR = 0.25
LANE_DEPARTURE_INITIAL_ERROR = 0.15
# e_tc* over the last quarter of the pre-collision window
CONVERGED_ERROR = 0.05
CONVERGED_FRACTION = 0.75

TTC_TOLERANCE = 0.02
TRUE_TTC_TOLERANCE = 0.03
THRESHOLD_TIME = 1.5  # 3D t_c* at which the one-dimensional error is read
FOLLOWING_THRESHOLD_ERROR = 0.25
MERGING_THRESHOLD_ERROR = 0.2
CLOSED_FORM_TOLERANCE = 1e-6
BOUND_SLACK = 1e-9  # rounding allowance at the edge of a +/- window

EXPERIMENT4_SEQUENCE = (
    (1.0, {"obstacle"}),
    (4.0, {"obstacle"}),
    (6.0, {"upper-boundary", "vehicle-2"}),
    (9.0, {"upper-boundary", "vehicle-2"}),
    (11.0, {"lower-boundary"}),
    (14.0, {"lower-boundary"}),
    (16.0, set()),
    (19.0, set()),
)


@dataclass(frozen=True)
class CheckResult:
    """One acceptance check.

    Attributes:
        name: Short identifier printed by ``verify``
        measured: Measured value (None when it could not be measured)
        threshold: Human-readable pass condition
        passed: Whether the check passed
    """

    name: str
    measured: float | str | None
    threshold: str
    passed: bool

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        measured = f"{self.measured:.4f}" if isinstance(self.measured, float) else self.measured
        return f"[{status}] {self.name}: {measured} ({self.threshold})"


def _within(
    name: str, measured: float | None, target: float | None, tolerance: float
) -> CheckResult:
    passed = (
        measured is not None
        and target is not None
        and abs(measured - target) <= tolerance + BOUND_SLACK
    )
    return CheckResult(name, measured, f"{target} +/- {tolerance}", passed)


def _below(name: str, measured: float | None, bound: float) -> CheckResult:
    passed = measured is not None and measured < bound
    return CheckResult(name, measured, f"< {bound}", passed)


def _above(name: str, measured: float | None, bound: float) -> CheckResult:
    passed = measured is not None and measured > bound
    return CheckResult(name, measured, f"> {bound}", passed)


def _first(record: RunRecord, query_id: str):
    return record.evaluations[0][query_id]


def threshold_error(record: RunRecord, query_id: str, threshold: float = THRESHOLD_TIME) -> float | None:
    """|1D - 3D| at the first evaluation whose numeric t_c* is at most ``threshold``."""
    for evaluations in record.evaluations:
        evaluation = evaluations[query_id]
        if evaluation.numeric is None or evaluation.numeric.t_c_star is None:
            continue
        if evaluation.numeric.t_c_star <= threshold:
            return evaluation.error
    return None


def converged_error(record: RunRecord, query_id: str) -> float | None:
    """Largest e_tc* over the last quarter of the window before the predicted collision."""
    numeric = _first(record, query_id).numeric
    if numeric is None or numeric.t_c_star is None:
        return None
    start = CONVERGED_FRACTION * numeric.t_c_star
    errors = [
        error
        for time, error in record.errors(query_id)
        if start <= time < numeric.t_c_star and error is not None
    ]
    return max(errors) if errors else None


def constant_velocity_axis_ttc(scenario: Scenario, query_id: str) -> float | None:
    """TTC along a query's axis from the initial bicycle states, held at constant velocity.

    The spacing is the axis separation of the two centres less both radii, and the
    closing speed is the difference of the axis velocity components ``v cos theta``
    or ``v sin theta``. None when the vehicles do not close.
    """
    query = next(query for query in scenario.queries if query.query_id == query_id)
    component = math.cos if query.axis == "x" else math.sin
    index = 0 if query.axis == "x" else 1
    ego, target = scenario.vehicle(query.ego), scenario.vehicle(query.target)
    for vehicle in (ego, target):
        if vehicle.family not in (ModelFamily.BICYCLE_2D, ModelFamily.BICYCLE_3D):
            raise ValueError(f"vehicle '{vehicle.vehicle_id}' is not a Cartesian bicycle")

    separation = target.state[index] - ego.state[index]
    rate = target.state[3] * component(target.state[2]) - ego.state[3] * component(ego.state[2])
    if separation * rate >= 0:
        return None
    gap = abs(separation) - (ego.geometry.max_radius + target.geometry.max_radius)
    return max(gap, 0.0) / abs(rate)


def check_car_following(defaults: Mapping[str, float]) -> list[CheckResult]:
    record = run(bundled_scenario("experiment3_following"), defaults=defaults)
    first = _first(record, "ttc-x")
    ttc, true = first.analytic.t_c_star, first.numeric.t_c_star
    relative = (ttc - true) / true if ttc is not None and true else None
    return [
        _within("car-following 1D TTC", ttc, 17.38, TTC_TOLERANCE),
        _within("car-following 3D t_c*", true, 6.22, TRUE_TTC_TOLERANCE),
        _above("car-following relative TTC error", relative, 1.5),
        _above(
            "car-following |1D - 3D| at 3D t_c* = 1.5 s",
            threshold_error(record, "ttc-x"),
            FOLLOWING_THRESHOLD_ERROR,
        ),
    ]


def check_merging(defaults: Mapping[str, float]) -> list[CheckResult]:
    scenario = bundled_scenario("experiment3_merging")
    record = run(scenario, defaults=defaults)
    first = _first(record, "ttc-y")
    ttc, true = first.analytic.t_c_star, first.numeric.t_c_star
    relative = (ttc - true) / true if ttc is not None and true else None
    closed_form = constant_velocity_axis_ttc(scenario, "ttc-y")
    return [
        _within("merging lateral TTC", ttc, 20.18, TTC_TOLERANCE),
        _within(
            "merging lateral TTC vs constant-velocity closed form",
            ttc,
            closed_form,
            CLOSED_FORM_TOLERANCE,
        ),
        _within("merging 3D t_c*", true, 4.66, TRUE_TTC_TOLERANCE),
        _above("merging relative TTC error", relative, 3.0),
        _above(
            "merging |1D - 3D| at 3D t_c* = 1.5 s",
            threshold_error(record, "ttc-y"),
            MERGING_THRESHOLD_ERROR,
        ),
    ]


def check_converging_bicycles(defaults: Mapping[str, float]) -> list[CheckResult]:
    record = run(bundled_scenario("experiment1"), defaults=defaults)
    return [
        _below(
            "converging bicycles e_tc*(0)",
            _first(record, "v1-v2").error,
            CONVERGING_INITIAL_ERROR,
        ),
        _below(
            "converging bicycles final-window e_tc*",
            converged_error(record, "v1-v2"),
            CONVERGED_ERROR,
        ),
    ]


def check_lane_departure(defaults: Mapping[str, float]) -> list[CheckResult]:
    record = run(bundled_scenario("experiment2"), defaults=defaults)
    return [
        _below(
            "lane departure e_tc*(0)",
            _first(record, "right-boundary").error,
            LANE_DEPARTURE_INITIAL_ERROR,
        )
    ]


def active_risks(record: RunRecord, time: float, route: str | None = None) -> dict[str, float]:
    """Queries with a predicted collision at the evaluation closest to ``time``.

    ``route`` picks ``"analytic"`` or ``"numeric"`` results; by default each query
    reports its analytic result when one exists.
    """
    risks = {}
    for query_id, evaluation in record.at(time).items():
        result = evaluation.result if route is None else getattr(evaluation, route)
        if result is not None and result.t_c_star is not None:
            risks[query_id] = result.t_c_star
    return risks


def risk_sequence_checks(record: RunRecord, route: str) -> list[CheckResult]:
    """Risks at every sequence time plus darkening within each snapshot pair, on one route."""
    checks = []
    observed = [(time, active_risks(record, time, route)) for time, _ in EXPERIMENT4_SEQUENCE]
    for (time, expected), (_, risks) in zip(EXPERIMENT4_SEQUENCE, observed, strict=True):
        active = sorted(risks)
        checks.append(
            CheckResult(
                f"obstacle avoidance risks at T_r = {time:g} s ({route})",
                ", ".join(active) or "none",
                ", ".join(sorted(expected)) or "none",
                set(active) == expected,
            )
        )
    for (earlier_time, earlier), (later_time, later) in zip(observed[:-1:2], observed[1::2], strict=True):
        shared = sorted(set(earlier) & set(later))
        if not shared:
            continue
        darker = all(later[query_id] < earlier[query_id] for query_id in shared)
        checks.append(
            CheckResult(
                f"obstacle avoidance darkening {earlier_time:g} s -> {later_time:g} s ({route})",
                ", ".join(f"{query_id} {earlier[query_id]:.2f}->{later[query_id]:.2f}" for query_id in shared),
                "later t_c* strictly smaller",
                darker,
            )
        )
    return checks


def check_obstacle_avoidance(defaults: Mapping[str, float]) -> list[CheckResult]:
    record = run(bundled_scenario("experiment4"), defaults=defaults)
    routes = []
    if record.method.wants_analytic:
        routes.append("analytic")
    if record.method.wants_numeric:
        routes.append("numeric")
    return [check for route in routes for check in risk_sequence_checks(record, route)]


CHECKS: dict[str, Callable[[Mapping[str, float]], list[CheckResult]]] = {
    "experiment3_following": check_car_following,
    "experiment3_merging": check_merging,
    "experiment1": check_converging_bicycles,
    "experiment2": check_lane_departure,
    "experiment4": check_obstacle_avoidance,
}


def verify(defaults: Mapping[str, float] | None = None, only: list[str] | None = None) -> list[CheckResult]:
    """Run the acceptance checks of the bundled experiments.

    Args:
        defaults: Environment-level run defaults
        only: Restrict to these experiment names

    Returns:
        All check results, in order

    Raises:
        AcceptanceFailure: When any check fails; carries the full result list
    """
    defaults = defaults or {}
    names = only or list(CHECKS)
    unknown = [name for name in names if name not in CHECKS]
    if unknown:
        raise ValueError(f"unknown experiments: {', '.join(unknown)}")

    results: list[CheckResult] = []
    for name in names:
        logger.info(f"Verifying {name}")
        for check in CHECKS[name](defaults):
            log = logger.info if check.passed else logger.warning
            log(str(check))
            results.append(check)

    failed = [check for check in results if not check.passed]
    if failed:
        raise AcceptanceFailure(f"{len(failed)} of {len(results)} acceptance checks failed", results)
    return results
