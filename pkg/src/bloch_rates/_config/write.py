from pathlib import Path

import yaml
from rich.rule import Rule
from rich.syntax import Syntax

from bloch_rates._types.experiment import ExperimentConfig
from bloch_rates._util.console import study_print
from bloch_rates._util.pydantic_util import model_dump

CONFIG_FILE = "config.yaml"


def config_to_yaml(cfg: ExperimentConfig) -> str:
    return yaml.dump(
        model_dump(cfg),
        default_flow_style=False,
        sort_keys=False,
    )


def print_config_yaml(cfg: ExperimentConfig) -> None:
    dump = config_to_yaml(cfg)
    yaml_syntax = Syntax(dump, "yaml", theme="monokai", background_color="default")
    study_print("", Rule("Resolved configuration as YAML"), yaml_syntax, Rule())


def write_config_file(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    target = Path(out_dir) / CONFIG_FILE
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(config_to_yaml(cfg), encoding="utf-8")
    return target
