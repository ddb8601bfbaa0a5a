from logging import getLogger
from pathlib import Path
from typing import Any, Sequence

import yaml
from attr import dataclass, field
from pydantic_core import ValidationError

from bloch_rates._types.experiment import ExperimentConfig, StudyKind
from bloch_rates._util.console import path, study_print
from bloch_rates._util.error import HandledError, StudyError
from bloch_rates._util.util import maybe_json as _maybe_json

logger = getLogger(__name__)

CONFIG_SUFFIXES = (".yaml", ".yml")


@dataclass
class ConfigOptions:
    overrides: list[str] = field(factory=list)
    experiment: StudyKind | None = None
    seed: int | None = None
    jobs: int | None = None


def load_config(file: str | Path, options: ConfigOptions | None = None) -> ExperimentConfig:
    """Read a YAML experiment file, apply overrides and validate it.

    Raises:
        StudyError: If the file does not exist or is not YAML.
        HandledError: If validation fails (the error has been printed).
    """
    options = options or ConfigOptions()
    config_path = Path(file)
    if config_path.suffix not in CONFIG_SUFFIXES:
        raise StudyError(
            f"Unsupported config file extension: {config_path.suffix}. "
            "Supported extensions: .yaml, .yml"
        )
    if not config_path.is_file():
        raise StudyError(f"config file not found: {config_path}")
    with config_path.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise StudyError(f"{config_path} must hold a mapping at the top level.")
    logger.debug(f"loaded {config_path}")
    try:
        return config_from_dict(data, options)
    except ValidationError as e:
        study_print("Invalid config ", path(str(config_path)), format="error")
        study_print(e)
        raise HandledError from e


def config_from_dict(
    data: dict[str, Any], options: ConfigOptions | None = None
) -> ExperimentConfig:
    """Validate a config mapping after applying overrides and command line settings."""
    options = options or ConfigOptions()
    data = _apply_overrides(data, options.overrides)
    for key in ("experiment", "seed", "jobs"):
        value = getattr(options, key)
        if value is not None:
            data = {**data, key: value}
    return ExperimentConfig.model_validate(data)


def _override_value(keys: list[str], value: str) -> Any:
    if not keys:
        return _maybe_json(value)
    result: dict[str, Any] = {}
    obj = result
    for key in keys[:-1]:
        obj = obj.setdefault(key, {})
    obj[keys[-1]] = _maybe_json(value)
    return result


def _apply_override_to_list(
    obj: Sequence[Any], keys: list[str], value: str
) -> Sequence[Any]:
    if keys and keys[0].isdigit():
        # a numeric key addresses one entry, e.g. scaling.eps.0=0.2
        index = int(keys[0])
        if index >= len(obj):
            raise StudyError(f"override index {index} is out of range.")
        items = list(obj)
        items[index] = _update_value(items[index], keys[1:], value)
        return items
    override_value = _override_value(keys, value)
    if isinstance(override_value, list):
        # Treat override of a list with a list as full replacement
        return override_value
    elif override_value not in obj:
        # Append to list
        return list(obj) + [override_value]
    return obj


def _update_value(current_value: Any, keys: list[str], value: str) -> Any:
    if isinstance(current_value, (list, tuple)):
        return _apply_override_to_list(current_value, keys, value)
    elif not keys:
        return _maybe_json(value)
    elif isinstance(current_value, dict):
        return _apply_override_to_dict(current_value, keys, value)
    else:
        return _override_value(keys, value)


def _apply_override_to_dict(
    obj: dict[str, Any], keys: list[str], value: str
) -> dict[str, Any]:
    current_value = obj.get(keys[0], None)
    update_value = _update_value(current_value, keys[1:], value)
    return {**obj, keys[0]: update_value}


def _apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    for override in overrides:
        if "=" not in override:
            raise StudyError(f"override '{override}' is not of the form key.path=value.")
        key_path, value = override.split("=", 1)
        keys = key_path.split(".")
        data = _apply_override_to_dict(data, keys, value)
    return data
