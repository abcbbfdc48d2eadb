"""Shared fixtures."""

import pytest

from src.scenario import load_scenario

# Follower closing 48 m at 5 m/s: t_c* = 9.6 s at T_r = 0
PAIR_TEXT = """\
[scenario]
format = ssm-scenario v1
name = pair

[vehicle.ego]
model = cv1d
state = 0
control = 10
radius = 1
mass = 1500

[vehicle.lead]
model = cv1d
state = 50
control = 5
radius = 1
mass = 1500

[query.gap]
kind = vehicle-vehicle
ego = ego
target = lead

[sim]
duration = 1
period = 0.5
"""

FAST = {"oracle_step": 0.01, "oracle_steps": 2000, "horizon": 20.0}


@pytest.fixture
def pair_scenario():
    return load_scenario(PAIR_TEXT)


@pytest.fixture
def fast_defaults():
    return dict(FAST)


@pytest.fixture
def pair_text():
    return PAIR_TEXT
