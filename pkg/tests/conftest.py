"""
PyTest configuration file for PVBat-Sizer tests.

This module contains shared fixtures and configuration for all tests.
"""

import pytest
import os
import sys

# Add the root directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(
    os.path.dirname(__file__), '..')))

from tests.fixtures.scenarios import make_scenario, toy_scenario  # noqa: E402

CONFIG_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'config'))


@pytest.fixture
def temp_dir(tmpdir):
    """Create a temporary directory for test files."""
    return tmpdir


@pytest.fixture
def mock_config():
    """Return a small scenario configuration for testing."""
    return {
        "profiles": {
            "dt_hours": 1.0,
            "synthetic": {"steps": 24, "dt_hours": 1.0, "load_kwh": 2774.0,
                          "pv_wh_per_wp": 1020.0, "start_day": 160, "seed": 3},
        },
        "costs": {"annualize": True},
        "output_dir": "out",
    }


@pytest.fixture
def toy():
    """Four hourly steps: PV at midday, load in the morning and evening."""
    return toy_scenario()


@pytest.fixture
def scenario_factory():
    """Build scenarios from plain kW load and W/Wp PV lists."""
    return make_scenario


@pytest.fixture
def week_config_path():
    return os.path.join(CONFIG_DIR, 'week.yaml')
