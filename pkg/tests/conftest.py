# Configure environment BEFORE any imports that might initialize Rich
# This prevents Rich from wrapping log output at narrow column widths
import os

os.environ["COLUMNS"] = "500"
os.environ["NO_COLOR"] = "1"

import math
from collections.abc import Generator
from pathlib import Path
from typing import Any

import numpy as np
import pytest
import yaml
from bloch_rates import LevelSystem, QuasiPeriodicField, Scaling
from bloch_rates._util.constants import DEFAULT_LOG_LEVEL
from bloch_rates._util.logging import init_logging, reset_logging


@pytest.fixture(autouse=True)
def init_log_handler() -> Generator[None, None, None]:
    # Each test starts from a fresh package handler so a test that raises the
    # level (or the CLI's --log-level) cannot leak into the next one.
    import logging

    saved_level = logging.getLogger("bloch_rates").level
    init_logging(log_level=DEFAULT_LOG_LEVEL)
    try:
        yield
    finally:
        reset_logging()
        logging.getLogger("bloch_rates").setLevel(saved_level)


@pytest.fixture(autouse=True)
def reset_console_state() -> Generator[None, None, None]:
    from bloch_rates._util.console import console

    try:
        yield
    finally:
        console.quiet = False


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


def two_level(
    gamma: float = 1.0,
    delta: tuple[float, float] | None = None,
    W: list[list[float]] | None = None,
) -> LevelSystem:
    """Two levels one unit apart with a unit dipole coupling."""
    return LevelSystem.from_arrays(
        omega=[0.0, 1.0],
        delta=delta,
        gamma=[[0.0, gamma], [gamma, 0.0]],
        V=[[0.0, 1.0], [1.0, 0.0]],
        W=W,
    )


def three_level_pauli() -> LevelSystem:
    """Three equally spaced levels with Pauli rates at temperature 1."""
    e = math.exp(-1.0)
    return LevelSystem.from_arrays(
        omega=[0.0, 1.0, 2.0],
        gamma=[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
        V=np.zeros((3, 3)),
        W=[[0.0, e, 0.0], [1.0, 0.0, e], [0.0, 1.0, 0.0]],
        temperature=1.0,
    )


def unit_cosine() -> QuasiPeriodicField:
    """phi(s) = 2 cos(s)."""
    return QuasiPeriodicField.cosine(1.0, 1.0)


def scaling(eps: float, mu: float = 0.0, p: float = 1.0) -> Scaling:
    return Scaling(eps=eps, mu=mu, p=p)


def write_config(tmp_path: Path, data: dict[str, Any], name: str = "study.yaml") -> str:
    config_file = tmp_path / name
    config_file.write_text(yaml.safe_dump(data, sort_keys=False))
    return str(config_file)


def two_level_config(**sections: Any) -> dict[str, Any]:
    """A small inline configuration around the two level system."""
    data: dict[str, Any] = {
        "system": {
            "omega": [0.0, 1.0],
            "gamma": [[0.0, 1.0], [1.0, 0.0]],
            "V": [[0.0, 1.0], [1.0, 0.0]],
        },
        "field": {
            "freq": [1.0],
            "modes": [
                {"alpha": [1], "value": 1.0},
                {"alpha": [-1], "value": 1.0},
            ],
        },
        "scaling": {"eps": [0.4, 0.2, 0.1], "mu": 0.0, "p": 1.0},
    }
    data.update(sections)
    return data


def pytest_addoption(parser: pytest.Parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_configure(config: pytest.Config):
    config.addinivalue_line("markers", "slow: mark test as slow to run")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]):
    if not config.getoption("--runslow"):
        skip_slow = pytest.mark.skip(reason="need --runslow option to run")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)
