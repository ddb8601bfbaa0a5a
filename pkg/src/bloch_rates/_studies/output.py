"""Assembling study results and writing them to a study directory."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from bloch_rates._types.experiment import ExperimentConfig, StudyKind
from bloch_rates._types.results import SlopeFit, StudyResult
from bloch_rates._util.constants import RESULT_FILE, SERIES_FILE
from bloch_rates._util.io import write_csv, write_json
from bloch_rates._util.pydantic_util import model_dump


@dataclass(frozen=True)
class Table:
    header: list[str]
    rows: list[list[Any]]


@dataclass(frozen=True)
class StudyOutput:
    """A result plus the CSV tables that go next to it; ``series`` is the main one."""

    result: StudyResult
    tables: dict[str, Table] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.result.passed


def _resolve_version() -> str:
    try:
        from bloch_rates._version import __version__
    except ImportError:  # pragma: no cover
        return "unknown"
    return __version__


def _resolve_python_version() -> str:
    return f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}"


def run_metadata() -> dict[str, str]:
    """Package and library versions; no timings so reruns stay byte-identical."""
    return {
        "bloch_rates": _resolve_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": _resolve_python_version(),
    }


def build_result(
    study: StudyKind,
    cfg: ExperimentConfig,
    checks: dict[str, bool],
    table: Sequence[dict[str, Any]] = (),
    fit: SlopeFit | None = None,
    expected: float | None = None,
    tolerance: float | None = None,
    channel: str | None = None,
    notes: Sequence[str] = (),
    details: dict[str, Any] | None = None,
) -> StudyResult:
    resolved = cfg.model_copy(update={"experiment": study})
    return StudyResult(
        study=study,
        channel=channel,
        table=list(table),
        fit=fit,
        expected=expected,
        tolerance=tolerance,
        checks=dict(checks),
        passed=all(checks.values()),
        notes=list(notes),
        details=details or {},
        config=model_dump(resolved),
        metadata=run_metadata(),
    )


def table_from_rows(rows: Sequence[dict[str, Any]]) -> Table:
    """CSV table with the keys of the first row as header."""
    if not rows:
        return Table(header=[], rows=[])
    header = list(rows[0].keys())
    return Table(header=header, rows=[[row.get(key) for key in header] for row in rows])


def write_study(output: StudyOutput, out_dir: str | Path) -> list[Path]:
    """Write ``result.json`` plus one CSV per table into ``out_dir``."""
    target = Path(out_dir)
    written = [write_json(target / RESULT_FILE, model_dump(output.result))]
    for name, table in sorted(output.tables.items()):
        filename = SERIES_FILE if name == "series" else f"{name}.csv"
        written.append(write_csv(target / filename, table.header, table.rows))
    return written
