"""
Pytest configuration and fixtures for entbench tests
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))
from test_utils import TestFixtures

from entbench.core.config import BenchConfig
from entbench.core.sim import DensityMatrixSimulator


@pytest.fixture
def test_fixtures():
    """Provide test fixtures utility"""
    return TestFixtures()


@pytest.fixture
def quiet_config():
    """Single-threaded config without progress bars"""
    return BenchConfig(progress=False)


@pytest.fixture
def ideal_backend(quiet_config):
    """Simulator without gate, relaxation or readout noise"""
    return DensityMatrixSimulator(None, quiet_config)


@pytest.fixture
def line_device(test_fixtures):
    """Five-qubit path 0-1-2-3-4"""
    return test_fixtures.line_device(5)


@pytest.fixture
def layout_file(tmp_path, test_fixtures, line_device):
    """Layout file of the five-qubit path with default calibration"""
    return test_fixtures.create_layout_file(str(tmp_path / "layout.json"), line_device)
