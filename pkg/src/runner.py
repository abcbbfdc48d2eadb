"""Rolling-horizon evaluation of a scenario against an RK4-integrated world."""

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from src.collision import EvaluationMethod
from src.errors import EvaluationError
from src.lti_core import TIME_SLACK
from src.models import VELOCITY_INDEX
from src.predictor import CollisionEvaluator, Evaluation, PredictionSettings, WorldSnapshot
from src.scenario import Scenario, VehicleSpec
from src.trajectory import rk4_integrate

logger = logging.getLogger(__name__)

# Built-in run defaults, overridden by the environment, the scenario and the CLI
DEFAULTS = {
    "horizon": 20.0,
    "scan_step": 0.01,
    "period": 0.1,
    "oracle_step": 0.001,
    "oracle_steps": 6000,
}


@dataclass
class RunRecord:
    """Evaluations of every query at every evaluation time."""

    scenario: str
    method: EvaluationMethod
    query_ids: tuple[str, ...]
    times: list[float] = field(default_factory=list)
    evaluations: list[dict[str, Evaluation]] = field(default_factory=list)
    snapshots: dict[float, WorldSnapshot] = field(default_factory=dict)

    def append(self, time: float, evaluations: dict[str, Evaluation]) -> None:
        if self.times and time <= self.times[-1]:
            raise ValueError(f"evaluation times must increase: {self.times[-1]} -> {time}")
        self.times.append(time)
        self.evaluations.append(evaluations)

    def at(self, time: float) -> dict[str, Evaluation]:
        """Evaluations at the recorded time closest to ``time``."""
        if not self.times:
            raise KeyError(time)
        index = int(np.argmin(np.abs(np.asarray(self.times) - time)))
        return self.evaluations[index]

    def series(self, query_id: str, route: str = "analytic") -> list[tuple[float, float | None]]:
        """``(T_r, t_c*)`` pairs for one query and route ('analytic' or 'numeric')."""
        pairs = []
        for time, evaluations in zip(self.times, self.evaluations, strict=True):
            result = getattr(evaluations[query_id], route)
            pairs.append((time, None if result is None else result.t_c_star))
        return pairs

    def errors(self, query_id: str) -> list[tuple[float, float | None]]:
        """``(T_r, e_tc*)`` pairs for one query."""
        return [
            (time, evaluations[query_id].error)
            for time, evaluations in zip(self.times, self.evaluations, strict=True)
        ]


def evaluation_times(duration: float, period: float, extra: tuple[float, ...] = ()) -> list[float]:
    """Grid ``0, period, ..., duration`` merged with any extra times inside it."""
    count = math.floor(duration / period + 1e-9)
    times = {round(k * period, 9) for k in range(count + 1)}
    for time in extra:
        if 0.0 <= time <= duration + TIME_SLACK:
            times.add(round(time, 9))
        else:
            logger.warning(f"Snapshot time {time}s lies outside [0, {duration}]s, skipped")
    return sorted(times)


def _resolve(name: str, cli, scenario_value, defaults: Mapping[str, float]):
    if cli is not None:
        return cli
    if scenario_value is not None:
        return scenario_value
    return defaults.get(name, DEFAULTS[name])


def _advance(
    vehicle: VehicleSpec, state: np.ndarray, t_from: float, t_to: float, h: float
) -> np.ndarray:
    steps = max(round((t_to - t_from) / h), 1)
    sampled = rk4_integrate(
        vehicle.at(state, t_from).rhs(),
        state,
        vehicle.schedule.shifted(t_from),
        (t_to - t_from) / steps,
        steps,
        velocity_index=VELOCITY_INDEX.get(vehicle.family),
    )
    return sampled.states[-1]


def run(
    scenario: Scenario,
    method: EvaluationMethod | None = None,
    *,
    horizon: float | None = None,
    scan_step: float | None = None,
    period: float | None = None,
    duration: float | None = None,
    snapshot_times: tuple[float, ...] | None = None,
    defaults: Mapping[str, float] | None = None,
) -> RunRecord:
    """Evaluate every query of a scenario on a rolling horizon.

    The world advances with each vehicle's full model and actual control
    schedule (RK4 at the oracle step). At every evaluation time the
    predictions restart from the current state with the control frozen.

    Args:
        scenario: Validated scenario
        method: Routes to evaluate; falls back to the scenario, then 'both'
        horizon: Analytic horizon override (s)
        scan_step: Coarse bracket width override (s)
        period: Evaluation period override (s)
        duration: Run length override (s)
        snapshot_times: Times whose world state is kept for plotting
        defaults: Environment-level defaults (keys of ``DEFAULTS``)

    Returns:
        Record of all evaluations

    Raises:
        EvaluationError: When a query fails, annotated with T_r and query id
    """
    defaults = defaults or {}
    sim = scenario.sim
    method = method or sim.method or EvaluationMethod.BOTH
    settings = PredictionSettings(
        horizon=float(_resolve("horizon", horizon, sim.horizon, defaults)),
        scan_step=float(_resolve("scan_step", scan_step, sim.scan_step, defaults)),
        oracle_step=float(_resolve("oracle_step", None, sim.oracle_step, defaults)),
        oracle_steps=int(_resolve("oracle_steps", None, sim.oracle_steps, defaults)),
    )
    period = float(_resolve("period", period, sim.period, defaults))
    duration = duration if duration is not None else sim.duration
    snapshots = tuple(snapshot_times) if snapshot_times is not None else sim.snapshots
    if not (period > 0 and duration >= 0):
        raise ValueError(f"invalid run grid: period={period}, duration={duration}")

    record = RunRecord(scenario.name, method, tuple(query.query_id for query in scenario.queries))
    states = {vehicle.vehicle_id: np.array(vehicle.state) for vehicle in scenario.vehicles}
    obstacles = {obstacle.obstacle_id: obstacle for obstacle in scenario.obstacles}
    wanted = {round(time, 9) for time in snapshots}
    times = evaluation_times(duration, period, snapshots)

    logger.info(
        f"Running '{scenario.name}' ({method.value}): {len(times)} evaluation times, "
        f"{len(scenario.queries)} queries, horizon {settings.horizon}s"
    )
    previous = 0.0
    for time in times:
        if time > previous:
            for vehicle in scenario.vehicles:
                states[vehicle.vehicle_id] = _advance(
                    vehicle, states[vehicle.vehicle_id], previous, time, settings.oracle_step
                )
            previous = time

        snapshot = WorldSnapshot(
            time=time,
            vehicles={
                vehicle.vehicle_id: vehicle.at(states[vehicle.vehicle_id], time)
                for vehicle in scenario.vehicles
            },
            obstacles=obstacles,
            road=scenario.road,
            settings=settings,
        )
        evaluator = CollisionEvaluator(snapshot)
        evaluations = {}
        for query in scenario.queries:
            try:
                evaluations[query.query_id] = evaluator.evaluate(query, method)
            except (ArithmeticError, ValueError) as e:
                logger.error(f"Query '{query.query_id}' failed at T_r={time:.3f}s: {e}")
                raise EvaluationError(time, query.query_id, e) from e
        record.append(time, evaluations)
        if time in wanted:
            record.snapshots[time] = snapshot

    logger.info(f"Finished '{scenario.name}': {len(record.times)} evaluation times recorded")
    return record
