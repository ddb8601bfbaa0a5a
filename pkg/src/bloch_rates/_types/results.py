from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Self

from bloch_rates._types.experiment import StudyKind


class SlopeFit(BaseModel):
    """Least squares fit of ``log y`` against ``log x``."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    slope: float
    stderr: float
    intercept: float
    points: int = Field(ge=3)


class StudyResult(BaseModel):
    """Machine-readable summary written to ``result.json``."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    study: StudyKind
    channel: str | None = Field(
        default=None, description="Error channel or rate variant, when the study has one."
    )
    table: list[dict[str, Any]] = Field(
        default_factory=list, description="One row per eps (or per S, per c)."
    )
    fit: SlopeFit | None = Field(
        default=None, description="Log-log slope; only with at least three points."
    )
    expected: float | None = Field(default=None, description="Expected slope.")
    tolerance: float | None = Field(default=None, description="Half-width of the slope band.")
    checks: dict[str, bool] = Field(default_factory=dict)
    passed: bool
    notes: list[str] = Field(default_factory=list)
    details: dict[str, Any] = Field(
        default_factory=dict, description="Study specific reports."
    )
    config: dict[str, Any] = Field(description="The fully resolved experiment config.")
    metadata: dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        if self.passed != all(self.checks.values()):
            raise ValueError("passed must agree with the individual checks.")
        return self
