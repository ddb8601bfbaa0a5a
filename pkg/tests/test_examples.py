from pathlib import Path

import pytest
from bloch_rates import load_config, validate_system
from bloch_rates._studies.run import run_study

CONFIG_DIR = Path(__file__).parent.parent / "configs"
CONFIG_FILES = sorted(CONFIG_DIR.glob("*.yaml"))


def test_example_configs_exist():
    assert CONFIG_FILES


@pytest.mark.parametrize("config_file", CONFIG_FILES, ids=lambda p: p.stem)
def test_example_config_loads(config_file: Path):
    cfg = load_config(config_file)
    assert cfg.experiment is not None
    report = validate_system(cfg.level_system())
    assert report.valid, report.violations


@pytest.mark.slow
@pytest.mark.parametrize("config_file", CONFIG_FILES, ids=lambda p: p.stem)
def test_example_config_runs(config_file: Path):
    cfg = load_config(config_file)
    output = run_study(cfg)
    assert output.result.study == cfg.experiment
    assert output.result.checks
    assert output.passed, (output.result.checks, output.result.notes)
