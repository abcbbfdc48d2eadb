"""Test the command-line entry point."""

import os
from unittest.mock import patch

import pytest

from src import acceptance
from src.acceptance import CheckResult
from src.errors import EXIT_ACCEPTANCE, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION
from src.main import build_parser, main
from src.scenario import FORMAT_TAG


@pytest.fixture(autouse=True)
def clean_environment():
    with patch("src.main.load_dotenv"), patch.dict(os.environ, {}, clear=True):
        yield


class TestParser:
    """Test argument parsing."""

    def test_repeatable_scenario(self):
        """Test that --scenario may be given more than once."""
        args = build_parser().parse_args(["run", "--scenario", "a.cfg", "--scenario", "experiment1"])
        assert args.scenario == ["a.cfg", "experiment1"]

    def test_non_positive_horizon_rejected(self):
        """Test that argparse rejects a zero horizon."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--scenario", "x", "--horizon", "0"])

    def test_command_required(self):
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestCommands:
    """Test the commands end to end."""

    def test_schema(self, capsys):
        """Test that schema prints the format description."""
        assert main(["schema"]) == EXIT_OK
        assert FORMAT_TAG in capsys.readouterr().out

    def test_run_scenario_file(self, pair_text, tmp_path, capsys):
        """Test that run writes the CSV and prints its path."""
        scenario = tmp_path / "pair.cfg"
        scenario.write_text(pair_text + "oracle_step = 0.01\noracle_steps = 2000\n")
        out_dir = tmp_path / "out"

        assert main(["run", "--scenario", str(scenario), "--out", str(out_dir)]) == EXIT_OK
        assert (out_dir / "pair.csv").exists()
        assert str(out_dir / "pair.csv") in capsys.readouterr().out

    def test_invalid_scenario_exit_code(self, tmp_path):
        """Test that a scenario error exits with the validation code."""
        scenario = tmp_path / "broken.cfg"
        scenario.write_text("[scenario]\nformat = ssm-scenario v0\nname = broken\n")
        assert main(["run", "--scenario", str(scenario), "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_unknown_bundled_scenario_exit_code(self, tmp_path):
        """Test that an unknown bundled name is a validation error."""
        assert main(["run", "--scenario", "experiment9", "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_numeric_failure_exit_code(self, pair_text, tmp_path, monkeypatch):
        """Test that a failing query exits with the numeric code."""
        scenario = tmp_path / "pair.cfg"
        scenario.write_text(pair_text)

        def fail(self, query, method):
            raise FloatingPointError("overflow")

        monkeypatch.setattr("src.runner.CollisionEvaluator.evaluate", fail)
        assert main(["run", "--scenario", str(scenario), "--out", str(tmp_path)]) == EXIT_NUMERIC

    def test_verify_failure_exit_code(self, monkeypatch, capsys):
        """Test that failed checks are printed and exit with the acceptance code."""
        failing = CheckResult("lane departure e_tc*(0)", 0.2, "< 0.15", False)
        monkeypatch.setitem(acceptance.CHECKS, "experiment2", lambda defaults: [failing])

        assert main(["verify", "--only", "experiment2"]) == EXIT_ACCEPTANCE
        assert "[FAIL] lane departure" in capsys.readouterr().out

    def test_verify_success(self, monkeypatch, capsys):
        """Test that passing checks print a summary."""
        passing = CheckResult("lane departure e_tc*(0)", 0.04, "< 0.15", True)
        monkeypatch.setitem(acceptance.CHECKS, "experiment2", lambda defaults: [passing])

        assert main(["verify", "--only", "experiment2"]) == EXIT_OK
        assert "All 1 acceptance checks passed" in capsys.readouterr().out
