"""Scenario text format: parsing, validation and bundled experiment files."""

import configparser
import logging
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from src.collision import CollisionQuery, EvaluationMethod, Measure, QueryKind
from src.errors import ScenarioError
from src.frenet import ArcPath, PolylinePath, RoadGeometry
from src.lti_core import ControlSignal
from src.models import (
    CONTROL_LABELS,
    FORCE_BALANCE_FAMILIES,
    PLANAR_FAMILIES,
    STATE_LABELS,
    BoundingCircle,
    LongitudinalParams,
    ModelFamily,
    VehicleGeometry,
)
from src.predictor import (
    LATERAL_FAMILIES,
    PATH_FAMILIES,
    POSITIONED_FAMILIES,
    ObstacleState,
    VehicleState,
)

logger = logging.getLogger(__name__)

FORMAT_TAG = "ssm-scenario v1"
BUNDLED_PACKAGE = "src.scenarios"

_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_LINE = re.compile(r"^([^\s=:#;][^=:]*?)\s*[=:]")

LONGITUDINAL_KEYS = (
    "rho",
    "drag_coefficient",
    "frontal_area",
    "wheel_radius",
    "rolling_resistance",
)

SCHEMA_TEXT = f"""\
Scenario format: {FORMAT_TAG}
INI-style sections, '#' starts a comment, vectors are comma separated.

[scenario]
  format    = {FORMAT_TAG}                 (required)
  name      = <text>                          (required)

[road]                                        (required for boundary and path-model queries)
  type      = arc | polyline                  (default arc)
  origin    = x, y                            arc start (m)
  heading   = <rad>                           arc start heading
  curvature = <1/m>                           0 for a straight road
  length    = <m>
  vertices  = x y; x y; ...                   polyline vertices (m)
  width     = <m>                             (required)
  grade     = <rad>                           (default 0)

[vehicle.<id>]
  model     = {' | '.join(family.value for family in ModelFamily)}
  state     = comma-separated state vector
  control   = control held from t = 0
  control@T = control held from t = T seconds (any number of switches)
  wheelbase = <m>                             bicycle and path models
  radius    = <m>                             single circle at the C.G.
  circles   = offset:radius, ...              several circles along the body axis
  mass      = <kg>                            DeltaV and force-balance models
  length    = <m>                             optional
  rho, drag_coefficient, frontal_area, wheel_radius, rolling_resistance
            = force-balance parameters        lon3d, bicycle3d, latpath3d
  gravity   = <m/s^2>                         (default 9.81)

[obstacle.<id>]
  centre    = x, y
  radius    = <m>

[query.<id>]
  kind      = vehicle-vehicle | vehicle-obstacle | vehicle-boundary
  ego       = <vehicle id>
  target    = <vehicle or obstacle id>
  side      = 1 (left, +w/2) | 2 (right, -w/2)
  measure   = trajectory | ttc | rcri         (default trajectory)
  axis      = x | y                           one-dimensional measures (default x)
  max_deceleration = <m/s^2>                  rcri
  reaction_time    = <s>                      rcri (default 0)

[sim]
  duration     = <s>                          (required)
  period       = <s>                          evaluation period
  horizon      = <s>                          analytic horizon
  scan_step    = <s>                          coarse bracket width
  oracle_step  = <s>                          RK4 step
  oracle_steps = <int>                        RK4 steps per prediction
  snapshots    = T, T, ...                    evaluation times to keep for plotting
  method       = analytic | numeric | both

State vectors:
""" + "".join(
    f"  {family.value:<10} state [{', '.join(STATE_LABELS[family])}]"
    f"  control [{', '.join(CONTROL_LABELS[family])}]\n"
    for family in ModelFamily
)


@dataclass(frozen=True)
class VehicleSpec:
    """A vehicle's initial state and full control schedule."""

    vehicle_id: str
    family: ModelFamily
    state: tuple[float, ...]
    schedule: ControlSignal
    geometry: VehicleGeometry
    longitudinal: LongitudinalParams | None = None

    def at(self, state, t: float) -> VehicleState:
        """Vehicle at time ``t`` in ``state`` with the control scheduled for ``t``."""
        return VehicleState(
            self.vehicle_id,
            self.family,
            tuple(state),
            tuple(self.schedule.value_at(t)),
            self.geometry,
            self.longitudinal,
        )


@dataclass(frozen=True)
class SimSettings:
    """Run settings; ``None`` falls back to the environment or built-in defaults."""

    duration: float
    period: float | None = None
    horizon: float | None = None
    scan_step: float | None = None
    oracle_step: float | None = None
    oracle_steps: int | None = None
    snapshots: tuple[float, ...] = ()
    method: EvaluationMethod | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    vehicles: tuple[VehicleSpec, ...]
    queries: tuple[CollisionQuery, ...]
    sim: SimSettings
    obstacles: tuple[ObstacleState, ...] = ()
    road: RoadGeometry | None = None

    def vehicle(self, vehicle_id: str) -> VehicleSpec:
        for vehicle in self.vehicles:
            if vehicle.vehicle_id == vehicle_id:
                return vehicle
        raise KeyError(vehicle_id)


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """1-based line numbers of section headers and keys."""
    index: dict[tuple[str, str | None], int] = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        header = _SECTION_LINE.match(raw)
        if header:
            section = header.group(1).strip()
            index.setdefault((section, None), number)
            continue
        key = _KEY_LINE.match(raw)
        if section is not None and key:
            index.setdefault((section, key.group(1).strip()), number)
    return index


class _Reader:
    """Typed access to parsed sections with line-precise errors."""

    def __init__(self, parser: configparser.ConfigParser, text: str, source: str):
        self.parser = parser
        self.source = source
        self.lines = _line_index(text)

    def error(self, message: str, section: str, key: str | None = None) -> ScenarioError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        field = f"{section}.{key}" if key else section
        return ScenarioError(message, source=self.source, line=line, field=field)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def text(self, section: str, key: str, default: str | None = None) -> str:
        if not self.has(section, key):
            if default is None:
                raise self.error(f"missing required key '{key}'", section)
            return default
        value = self.parser.get(section, key).strip()
        if not value:
            raise self.error(f"key '{key}' is empty", section, key)
        return value

    def number(self, section: str, key: str, default: float | None = None) -> float:
        if not self.has(section, key) and default is not None:
            return default
        raw = self.text(section, key)
        try:
            value = float(raw)
        except ValueError:
            raise self.error(f"'{raw}' is not a number", section, key) from None
        if not math.isfinite(value):
            raise self.error(f"'{raw}' is not finite", section, key)
        return value

    def optional_number(self, section: str, key: str) -> float | None:
        return self.number(section, key) if self.has(section, key) else None

    def positive(self, section: str, key: str, default: float | None = None) -> float:
        value = self.number(section, key, default)
        if not value > 0:
            raise self.error(f"'{key}' must be positive, got {value}", section, key)
        return value

    def vector(self, section: str, key: str, length: int | None = None) -> tuple[float, ...]:
        raw = self.text(section, key)
        try:
            values = tuple(float(item) for item in raw.replace(";", ",").split(","))
        except ValueError:
            raise self.error(f"'{raw}' is not a comma-separated list of numbers", section, key) from None
        if not all(math.isfinite(value) for value in values):
            raise self.error(f"'{raw}' contains non-finite entries", section, key)
        if length is not None and len(values) != length:
            raise self.error(f"expected {length} values, got {len(values)}", section, key)
        return values


def _parse_road(reader: _Reader) -> RoadGeometry | None:
    section = "road"
    if not reader.parser.has_section(section):
        return None
    kind = reader.text(section, "type", "arc")
    try:
        if kind == "arc":
            path = ArcPath(
                origin=reader.vector(section, "origin", 2),
                heading=reader.number(section, "heading", 0.0),
                curvature=reader.number(section, "curvature", 0.0),
                length=reader.positive(section, "length"),
            )
        elif kind == "polyline":
            raw = reader.text(section, "vertices")
            try:
                vertices = [
                    [float(item) for item in pair.split()] for pair in raw.split(";") if pair.strip()
                ]
            except ValueError:
                raise reader.error(f"'{raw}' is not a list of 'x y' pairs", section, "vertices") from None
            path = PolylinePath(vertices)
        else:
            raise reader.error(f"unknown road type '{kind}'", section, "type")
        return RoadGeometry(
            path, reader.positive(section, "width"), reader.number(section, "grade", 0.0)
        )
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise reader.error(str(e), section) from None


def _parse_circles(reader: _Reader, section: str) -> tuple[BoundingCircle, ...]:
    if reader.has(section, "circles"):
        raw = reader.text(section, "circles")
        circles = []
        for item in raw.split(","):
            try:
                offset, radius = (float(part) for part in item.split(":"))
            except ValueError:
                raise reader.error(f"'{item.strip()}' is not 'offset:radius'", section, "circles") from None
            circles.append(BoundingCircle(offset, radius))
        return tuple(circles)
    return (BoundingCircle(0.0, reader.positive(section, "radius")),)


def _parse_schedule(
    reader: _Reader, section: str, family: ModelFamily
) -> ControlSignal:
    width = len(CONTROL_LABELS[family])
    pieces = [(0.0, reader.vector(section, "control", width))]
    for key in reader.parser.options(section):
        if not key.startswith("control@"):
            continue
        try:
            start = float(key.split("@", 1)[1])
        except ValueError:
            raise reader.error(f"switch time in '{key}' is not a number", section, key) from None
        if not start > 0:
            raise reader.error("switch times must be positive", section, key)
        pieces.append((start, reader.vector(section, key, width)))
    try:
        return ControlSignal.from_pieces(pieces)
    except ValueError as e:
        raise reader.error(str(e), section, "control") from None


def _parse_vehicle(reader: _Reader, section: str, vehicle_id: str) -> VehicleSpec:
    model = reader.text(section, "model")
    try:
        family = ModelFamily(model)
    except ValueError:
        raise reader.error(f"unknown model family '{model}'", section, "model") from None

    state = reader.vector(section, "state", len(STATE_LABELS[family]))
    schedule = _parse_schedule(reader, section, family)

    needs_wheelbase = family in PLANAR_FAMILIES or family is ModelFamily.LATERAL_PATH
    wheelbase = reader.positive(section, "wheelbase") if needs_wheelbase else reader.positive(
        section, "wheelbase", 1.0
    )
    mass = reader.optional_number(section, "mass")

    longitudinal = None
    if family in FORCE_BALANCE_FAMILIES:
        if mass is None:
            raise reader.error(f"model '{family.value}' needs 'mass'", section)
        values = {key: reader.number(section, key) for key in LONGITUDINAL_KEYS}
        try:
            longitudinal = LongitudinalParams(
                mass=mass, gravity=reader.number(section, "gravity", 9.81), **values
            )
        except ValueError as e:
            raise reader.error(str(e), section) from None

    try:
        geometry = VehicleGeometry(
            wheelbase,
            _parse_circles(reader, section),
            mass,
            reader.optional_number(section, "length"),
        )
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise reader.error(str(e), section) from None
    return VehicleSpec(vehicle_id, family, state, schedule, geometry, longitudinal)


def _parse_obstacle(reader: _Reader, section: str, obstacle_id: str) -> ObstacleState:
    return ObstacleState(
        obstacle_id, reader.vector(section, "centre", 2), reader.positive(section, "radius")
    )


def _parse_query(
    reader: _Reader,
    section: str,
    query_id: str,
    vehicles: dict[str, VehicleSpec],
    obstacles: dict[str, ObstacleState],
    road: RoadGeometry | None,
) -> CollisionQuery:
    try:
        kind = QueryKind(reader.text(section, "kind"))
    except ValueError:
        raise reader.error(f"unknown query kind '{reader.text(section, 'kind')}'", section, "kind") from None
    try:
        measure = Measure(reader.text(section, "measure", Measure.TRAJECTORY.value))
    except ValueError:
        raise reader.error("unknown measure", section, "measure") from None

    ego = reader.text(section, "ego")
    if ego not in vehicles:
        raise reader.error(f"unknown vehicle '{ego}'", section, "ego")
    family = vehicles[ego].family

    target = None
    side = None
    if kind is QueryKind.VEHICLE_BOUNDARY:
        side = int(reader.number(section, "side"))
        if road is None:
            raise reader.error("boundary queries need a [road] section", section)
        if family not in LATERAL_FAMILIES:
            raise reader.error(f"model '{family.value}' has no lateral offset", section, "ego")
    else:
        target = reader.text(section, "target")
        pool = vehicles if kind is QueryKind.VEHICLE_VEHICLE else obstacles
        if target not in pool:
            noun = "vehicle" if kind is QueryKind.VEHICLE_VEHICLE else "obstacle"
            raise reader.error(f"unknown {noun} '{target}'", section, "target")
        families = [family]
        if kind is QueryKind.VEHICLE_VEHICLE:
            families.append(vehicles[target].family)
        for member in families:
            if member not in POSITIONED_FAMILIES:
                raise reader.error(f"model '{member.value}' has no position", section)
            if member in PATH_FAMILIES and road is None:
                raise reader.error("path-coordinate vehicles need a [road] section", section)

    try:
        return CollisionQuery(
            query_id=query_id,
            kind=kind,
            ego=ego,
            target=target,
            side=side,
            measure=measure,
            axis=reader.text(section, "axis", "x"),
            max_deceleration=reader.optional_number(section, "max_deceleration"),
            reaction_time=reader.number(section, "reaction_time", 0.0),
        )
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise reader.error(str(e), section) from None


def _parse_sim(reader: _Reader) -> SimSettings:
    section = "sim"
    if not reader.parser.has_section(section):
        raise reader.error("missing [sim] section", "scenario")

    def optional_positive(key: str) -> float | None:
        return reader.positive(section, key) if reader.has(section, key) else None

    oracle_steps = None
    if reader.has(section, "oracle_steps"):
        oracle_steps = int(reader.positive(section, "oracle_steps"))
    method = None
    if reader.has(section, "method"):
        try:
            method = EvaluationMethod(reader.text(section, "method"))
        except ValueError:
            raise reader.error("method must be analytic, numeric or both", section, "method") from None
    snapshots: tuple[float, ...] = ()
    if reader.has(section, "snapshots"):
        snapshots = tuple(sorted(reader.vector(section, "snapshots")))

    return SimSettings(
        duration=reader.positive(section, "duration"),
        period=optional_positive("period"),
        horizon=optional_positive("horizon"),
        scan_step=optional_positive("scan_step"),
        oracle_step=optional_positive("oracle_step"),
        oracle_steps=oracle_steps,
        snapshots=snapshots,
        method=method,
    )


def load_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate scenario text.

    Args:
        text: Scenario in the ``ssm-scenario v1`` format
        source: Name used in diagnostics

    Returns:
        Validated scenario

    Raises:
        ScenarioError: On any syntax or validation problem, with line and field
    """
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateSectionError as e:
        name = e.section.split(".", 1)[-1]
        raise ScenarioError(f"duplicate id '{name}'", source=source, line=e.lineno, field=e.section) from None
    except configparser.DuplicateOptionError as e:
        raise ScenarioError(
            f"duplicate key '{e.option}'", source=source, line=e.lineno, field=f"{e.section}.{e.option}"
        ) from None
    except configparser.MissingSectionHeaderError as e:
        raise ScenarioError("missing [scenario] header", source=source, line=e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ScenarioError("malformed line", source=source, line=line) from None

    reader = _Reader(parser, text, source)
    sections = parser.sections()
    if not sections or sections[0] != "scenario":
        raise ScenarioError("first section must be [scenario]", source=source, line=1)
    tag = reader.text("scenario", "format")
    if tag != FORMAT_TAG:
        raise reader.error(f"unsupported format '{tag}', expected '{FORMAT_TAG}'", "scenario", "format")
    name = reader.text("scenario", "name")

    known = {"scenario", "road", "sim"}
    for section in sections:
        prefix = section.split(".", 1)[0]
        if section not in known and (prefix not in ("vehicle", "obstacle", "query") or "." not in section):
            raise reader.error(f"unknown section [{section}]", section)

    road = _parse_road(reader)

    ids: set[str] = set()

    def claim(section: str) -> str:
        identifier = section.split(".", 1)[1].strip()
        if not identifier:
            raise reader.error("empty id", section)
        if identifier in ids:
            raise reader.error(f"duplicate id '{identifier}'", section)
        ids.add(identifier)
        return identifier

    vehicles: dict[str, VehicleSpec] = {}
    obstacles: dict[str, ObstacleState] = {}
    for section in sections:
        if section.startswith("vehicle."):
            identifier = claim(section)
            vehicles[identifier] = _parse_vehicle(reader, section, identifier)
        elif section.startswith("obstacle."):
            identifier = claim(section)
            obstacles[identifier] = _parse_obstacle(reader, section, identifier)
    if not vehicles:
        raise ScenarioError("scenario defines no vehicles", source=source)

    queries = []
    query_ids: set[str] = set()
    for section in sections:
        if section.startswith("query."):
            identifier = section.split(".", 1)[1].strip()
            if identifier in query_ids:
                raise reader.error(f"duplicate id '{identifier}'", section)
            query_ids.add(identifier)
            queries.append(_parse_query(reader, section, identifier, vehicles, obstacles, road))

    scenario = Scenario(
        name=name,
        vehicles=tuple(vehicles.values()),
        queries=tuple(queries),
        sim=_parse_sim(reader),
        obstacles=tuple(obstacles.values()),
        road=road,
    )
    logger.debug(
        f"Loaded scenario '{name}' from {source}: {len(vehicles)} vehicles, "
        f"{len(obstacles)} obstacles, {len(queries)} queries"
    )
    return scenario


def load_scenario_file(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", source=str(path)) from None
    return load_scenario(text, source=str(path))


def bundled_scenario_names() -> list[str]:
    """Names of the scenarios shipped with the package."""
    return sorted(
        entry.name[: -len(".cfg")]
        for entry in resources.files(BUNDLED_PACKAGE).iterdir()
        if entry.name.endswith(".cfg")
    )


def bundled_scenario(name: str) -> Scenario:
    """Load a shipped scenario by name (e.g. ``experiment1``)."""
    entry = resources.files(BUNDLED_PACKAGE) / f"{name}.cfg"
    if not entry.is_file():
        raise ScenarioError(
            f"no bundled scenario '{name}' (available: {', '.join(bundled_scenario_names())})",
            source=name,
        )
    return load_scenario(entry.read_text(encoding="utf-8"), source=f"{name}.cfg")
