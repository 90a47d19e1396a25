# Shared fixtures for the pydiapir test suite
import numpy as np
import pytest

from pydiapir import scenario_io, sla
from pydiapir.aux import env_flag

# coarse version of the single-diapir scenario: 12 x 6 cells of 100 m x 50 m
SMALL_OVERRIDES = [
    "geometry.nx=12",
    "geometry.ny_salt=2",
    "geometry.ny_sediment=4",
    "time.dt=0.02",
    "time.n_steps=3",
    "output.cadence=2",
]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs, enabled with SLA_SLOW_TESTS=yes")


def pytest_collection_modifyitems(config, items):
    if env_flag("SLA_SLOW_TESTS"):
        return
    skip = pytest.mark.skip(reason="set SLA_SLOW_TESTS=yes to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def small_config():
    return scenario_io.load_preset("diapir_6_1", SMALL_OVERRIDES)


@pytest.fixture
def unperturbed_config():
    return scenario_io.load_preset("diapir_6_1", SMALL_OVERRIDES + ["perturbation.enabled=false"])


@pytest.fixture
def equilibrium_state(unperturbed_config):
    return sla.initialize(unperturbed_config)


@pytest.fixture
def perturbed_state(small_config):
    return sla.apply_perturbation(sla.initialize(small_config), small_config.perturbation)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.delenv("SLA_THREADS", raising=False)
