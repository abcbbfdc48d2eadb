"""Test configuration loading and validation."""

import os
from unittest.mock import patch

import pytest

from src.main import ENV_KEYS, load_config


@pytest.fixture(autouse=True)
def no_dotenv():
    with patch("src.main.load_dotenv"):
        yield


class TestConfigValidation:
    """Test configuration validation."""

    def test_env_example_exists(self):
        """Test that .env.example exists."""
        assert os.path.exists(".env.example")

    def test_env_example_has_required_keys(self):
        """Test that .env.example documents every setting."""
        with open(".env.example") as f:
            content = f.read()

        required_keys = [*ENV_KEYS, "SSM_OUTPUT_DIR", "SSM_LOG_LEVEL"]

        for key in required_keys:
            assert key in content, f"Missing required key: {key}"

    @patch.dict(os.environ, {"SSM_HORIZON": "soon"}, clear=True)
    def test_non_numeric_value(self):
        """Test that a non-numeric horizon stops startup."""
        with pytest.raises(SystemExit) as excinfo:
            load_config()
        assert excinfo.value.code == 1

    @patch.dict(os.environ, {"SSM_SCAN_STEP": "0"}, clear=True)
    def test_non_positive_value(self):
        """Test that a zero scan step stops startup."""
        with pytest.raises(SystemExit):
            load_config()

    @patch.dict(os.environ, {"SSM_ORACLE_STEPS": "1.5"}, clear=True)
    def test_step_count_must_be_integer(self):
        """Test that the RK4 step count is an integer."""
        with pytest.raises(SystemExit):
            load_config()

    @patch.dict(os.environ, {"SSM_LOG_LEVEL": "LOUD"}, clear=True)
    def test_unknown_log_level(self):
        """Test that an unknown log level stops startup."""
        with pytest.raises(SystemExit):
            load_config()


class TestEnvironmentConfig:
    """Test environment configuration."""

    @patch.dict(os.environ, {}, clear=True)
    def test_defaults(self):
        """Test the defaults when nothing is set."""
        config = load_config()
        assert config["horizon"] == 20.0
        assert config["scan_step"] == 0.01
        assert config["period"] == 0.1
        assert config["oracle_step"] == 0.001
        assert config["oracle_steps"] == 6000
        assert config["output_dir"] == "out"
        assert config["log_level"] == "INFO"

    @patch.dict(os.environ, {"SSM_HORIZON": " 25 ", "SSM_LOG_LEVEL": "debug"}, clear=True)
    def test_overrides(self):
        """Test values are parsed, trimmed and normalised."""
        config = load_config()
        assert config["horizon"] == 25.0
        assert config["log_level"] == "DEBUG"

    @patch.dict(os.environ, {"SSM_OUTPUT_DIR": "~/ssm"}, clear=True)
    def test_output_dir_expanded(self):
        """Test that ~ in the output directory is expanded."""
        config = load_config()
        assert not config["output_dir"].startswith("~")
