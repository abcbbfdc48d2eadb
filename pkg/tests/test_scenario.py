"""Test scenario parsing and validation."""

import pytest

from src.collision import EvaluationMethod, Measure, QueryKind
from src.errors import ScenarioError
from src.models import ModelFamily
from src.scenario import (
    FORMAT_TAG,
    SCHEMA_TEXT,
    bundled_scenario,
    bundled_scenario_names,
    load_scenario,
    load_scenario_file,
)

BASE = """\
[scenario]
format = ssm-scenario v1
name = pair

[vehicle.ego]
model = cv1d
state = 0
control = 10
radius = 1

[vehicle.lead]
model = cv1d
state = 50
control = 5
radius = 1

[query.gap]
kind = vehicle-vehicle
ego = ego
target = lead

[sim]
duration = 1
period = 0.5
"""

BUNDLED = [
    "experiment1",
    "experiment2",
    "experiment3_following",
    "experiment3_merging",
    "experiment4",
]


def parse_error(text):
    with pytest.raises(ScenarioError) as excinfo:
        load_scenario(text)
    return excinfo.value


class TestLoadScenario:
    """Test parsing of valid scenarios."""

    def test_minimal_scenario(self):
        """Test the parsed vehicles, query and settings."""
        scenario = load_scenario(BASE)

        assert scenario.name == "pair"
        assert [vehicle.vehicle_id for vehicle in scenario.vehicles] == ["ego", "lead"]
        assert scenario.vehicle("lead").state == (50.0,)
        assert scenario.vehicle("ego").family is ModelFamily.CONSTANT_VELOCITY
        query = scenario.queries[0]
        assert query.kind is QueryKind.VEHICLE_VEHICLE
        assert (query.ego, query.target) == ("ego", "lead")
        assert scenario.sim.duration == 1.0
        assert scenario.sim.period == 0.5
        assert scenario.sim.method is None
        assert scenario.road is None

    def test_control_schedule(self):
        """Test that control@T keys add switches."""
        text = BASE.replace("control = 10\n", "control = 10\ncontrol@2 = 3\n")
        schedule = load_scenario(text).vehicle("ego").schedule
        assert schedule.value_at(1.0) == pytest.approx([10.0])
        assert schedule.value_at(2.5) == pytest.approx([3.0])

    def test_snapshots_sorted(self):
        """Test that snapshot times are sorted."""
        scenario = load_scenario(BASE + "snapshots = 0.5, 0.2\nmethod = analytic\n")
        assert scenario.sim.snapshots == (0.2, 0.5)
        assert scenario.sim.method is EvaluationMethod.ANALYTIC

    def test_inline_comments(self):
        """Test that trailing comments are ignored."""
        scenario = load_scenario(BASE.replace("state = 50", "state = 50  # metres ahead"))
        assert scenario.vehicle("lead").state == (50.0,)

    def test_unknown_vehicle_lookup(self):
        """Test that looking up a missing vehicle raises KeyError."""
        with pytest.raises(KeyError):
            load_scenario(BASE).vehicle("ghost")


class TestScenarioErrors:
    """Test diagnostics for invalid scenarios."""

    def test_bad_number_reports_line_and_field(self):
        """Test the line and field of an unparsable state."""
        error = parse_error(BASE.replace("state = 50", "state = fifty"))
        assert error.line == 13
        assert error.field == "vehicle.lead.state"
        assert str(error).startswith("<string>:13 [vehicle.lead.state]")

    def test_wrong_state_length(self):
        """Test that a state vector of the wrong length is rejected."""
        error = parse_error(BASE.replace("state = 0\n", "state = 0, 1\n"))
        assert error.line == 7
        assert "expected 1 values" in error.reason

    def test_unknown_model(self):
        """Test that an unknown model family is rejected."""
        error = parse_error(BASE.replace("model = cv1d", "model = hovercraft", 1))
        assert error.field == "vehicle.ego.model"

    def test_wrong_format_tag(self):
        """Test that only the v1 format is accepted."""
        error = parse_error(BASE.replace(FORMAT_TAG, "ssm-scenario v2"))
        assert error.line == 2
        assert error.field == "scenario.format"

    def test_duplicate_section(self):
        """Test that a repeated vehicle section is a duplicate id."""
        error = parse_error(BASE + "\n[vehicle.ego]\nmodel = cv1d\n")
        assert "duplicate id 'ego'" in error.reason

    def test_id_shared_by_vehicle_and_obstacle(self):
        """Test that vehicles and obstacles share one id space."""
        error = parse_error(BASE + "\n[obstacle.lead]\ncentre = 1, 1\nradius = 1\n")
        assert "duplicate id 'lead'" in error.reason

    def test_unknown_section(self):
        """Test that unknown sections are rejected."""
        error = parse_error(BASE + "\n[weather]\nrain = 1\n")
        assert error.field == "weather"

    def test_unknown_target(self):
        """Test that a query naming a missing vehicle is rejected."""
        error = parse_error(BASE.replace("target = lead", "target = ghost"))
        assert error.line == 20
        assert error.field == "query.gap.target"

    def test_boundary_query_needs_road(self):
        """Test that boundary queries need a [road] section."""
        text = BASE.replace("kind = vehicle-vehicle\nego = ego\ntarget = lead", "kind = vehicle-boundary\nego = ego\nside = 1")
        error = parse_error(text)
        assert "road" in error.reason

    def test_missing_sim(self):
        """Test that the [sim] section is required."""
        error = parse_error(BASE.split("[sim]")[0])
        assert "[sim]" in error.reason

    def test_first_section_must_be_scenario(self):
        """Test that the [scenario] header comes first."""
        head, rest = BASE.split("\n\n", 1)
        error = parse_error(rest + "\n" + head + "\n")
        assert error.line == 1

    def test_non_positive_radius(self):
        """Test that a zero radius is rejected."""
        error = parse_error(BASE.replace("radius = 1\n", "radius = 0\n", 1))
        assert error.field == "vehicle.ego.radius"

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a scenario error."""
        with pytest.raises(ScenarioError):
            load_scenario_file(tmp_path / "missing.cfg")


class TestBundledScenarios:
    """Test the scenarios shipped with the package."""

    def test_names(self):
        """Test every experiment is bundled."""
        assert bundled_scenario_names() == BUNDLED

    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled_scenarios_parse(self, name):
        """Test that each bundled scenario is valid."""
        scenario = bundled_scenario(name)
        assert scenario.name == name
        assert scenario.queries

    def test_car_following(self):
        """Test the car-following scenario uses TTC along x."""
        scenario = bundled_scenario("experiment3_following")
        query = scenario.queries[0]
        assert query.measure is Measure.TTC
        assert query.axis == "x"
        assert scenario.vehicle("1").longitudinal.mass == 1500.0

    def test_obstacle_avoidance(self):
        """Test the obstacle scenario has a road, an obstacle, four queries and both routes."""
        scenario = bundled_scenario("experiment4")
        assert scenario.road.width == 8.0
        assert [obstacle.obstacle_id for obstacle in scenario.obstacles] == ["rock"]
        assert [query.query_id for query in scenario.queries] == [
            "obstacle",
            "upper-boundary",
            "vehicle-2",
            "lower-boundary",
        ]
        assert scenario.sim.method is EvaluationMethod.BOTH

    def test_unknown_bundled_scenario(self):
        """Test that a missing bundled name lists the available ones."""
        with pytest.raises(ScenarioError, match="experiment1"):
            bundled_scenario("experiment9")

    def test_round_trip_through_file(self, tmp_path):
        """Test loading the same text from disk."""
        path = tmp_path / "pair.cfg"
        path.write_text(BASE, encoding="utf-8")
        assert load_scenario_file(path).name == "pair"


class TestSchema:
    """Test the schema description."""

    def test_schema_mentions_format_and_models(self):
        """Test the schema names the format tag and every model."""
        assert FORMAT_TAG in SCHEMA_TEXT
        for family in ModelFamily:
            assert family.value in SCHEMA_TEXT
