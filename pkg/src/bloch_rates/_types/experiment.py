# Type definitions for experiment config files.
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import Self

from bloch_rates._bloch.solver import SolverConfig
from bloch_rates._dioph.checks import DiophParams
from bloch_rates._model.family import LevelFamily
from bloch_rates._model.field import QuasiPeriodicField
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.state import Populations
from bloch_rates._model.system import LevelSystem

StudyKind = Literal[
    "simulate-bloch",
    "simulate-rate",
    "rates",
    "converge",
    "average-oracle",
    "timelayer",
    "equilibrium",
    "dioph",
]

ConvergenceChannel = Literal["coherence", "d_vs_rhod0", "d_vs_rhod1", "d_vs_rhod2"]

RateChoice = Literal["W", "averaged", "dominant", "oscillating", "limit"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FamilyConfig(_Section):
    """A level family and the number of levels to build from it."""

    rule: LevelFamily = Field(
        default_factory=LevelFamily, description="Generator rule for the levels."
    )
    N: int = Field(ge=1, description="Number of levels to build.")


class ScalingGrid(_Section):
    """The eps grid and the fixed exponents of a study."""

    eps: list[float] = Field(
        description="Values of eps, strictly decreasing, each in (0, 1]."
    )
    mu: float = Field(ge=0, lt=0.5, description="Relaxation exponent mu.")
    p: float = Field(default=1.0, gt=0, description="Degeneracy exponent p.")

    @field_validator("eps")
    @classmethod
    def _check_eps(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("eps grid is empty.")
        if any(not 0 < eps <= 1 for eps in value):
            raise ValueError("every eps must lie in (0, 1].")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("eps grid must be strictly decreasing.")
        return value

    def scalings(self) -> list[Scaling]:
        return [Scaling(eps=eps, mu=self.mu, p=self.p) for eps in self.eps]


class InitialConfig(_Section):
    populations: list[float] | None = Field(
        default=None,
        description="Initial populations; defaults to all mass on level 1 (or the family datum).",
    )


class ConvergeConfig(_Section):
    channel: ConvergenceChannel = Field(
        default="coherence", description="Error measured against the Bloch solution."
    )
    tolerance: float | None = Field(
        default=None,
        gt=0,
        description="Slope band half-width; 0.15 for coherence, 0.2 otherwise.",
    )
    fallback: bool | None = Field(
        default=None,
        description=(
            "Accept strict monotone decrease plus an endpoint exponent when the slope misses;"
            " on by default for the population channels, off for coherence."
        ),
    )
    steps_per_period: int = Field(
        default=32, ge=4, description="RK4 steps per fast period for d_vs_rhod0."
    )


class AverageOracleConfig(_Section):
    S_grid: list[float] = Field(
        default_factory=lambda: [250.0, 500.0, 1000.0, 2000.0],
        description="Averaging windows S, in fast time.",
    )
    points_per_period: int = Field(
        default=32, ge=4, description="Quadrature points per fastest oscillation."
    )
    slope_tolerance: float = Field(default=0.3, gt=0)
    relative_tolerance: float = Field(
        default=0.01,
        gt=0,
        description="Entrywise relative match required at the largest S.",
    )
    snap_to_period: bool = Field(
        default=True, description="Round S to whole forcing periods when r = 1."
    )

    @field_validator("S_grid")
    @classmethod
    def _check_grid(cls, value: list[float]) -> list[float]:
        if not value or any(S <= 0 for S in value):
            raise ValueError("S_grid must hold positive values.")
        return value


class TimelayerConfig(_Section):
    T: float | None = Field(
        default=None,
        gt=0,
        description="Final time shared by every eps; by default each eps runs for `horizon` layer times.",
    )
    horizon: float = Field(
        default=16.0,
        gt=0,
        description="Final time in units of the predicted layer time 1/(c eps^-sigma).",
    )
    steps: int = Field(default=2000, ge=10, description="Snapshot intervals.")
    tolerance: float = Field(default=0.2, gt=0, description="Slope band half-width.")
    rate_band: tuple[float, float] = Field(
        default=(1.0, 3.0),
        description="Accepted range of fitted rate over c eps^-sigma.",
    )


class EquilibriumConfig(_Section):
    rate: Literal["limit", "W", "w_mod"] = Field(
        default="limit",
        description="Generator studied: the limit system (w_mod when mu = 0), W alone, or w_mod.",
    )
    T: float = Field(default=50.0, gt=0)
    steps: int = Field(default=500, ge=1)
    tolerance: float = Field(default=1e-6, gt=0)


class GenericityConfig(_Section):
    r: int = Field(default=2, ge=1)
    ball_radius: float = Field(default=1.0, gt=0)
    n_samples: int = Field(default=10_000, ge=100)
    c_grid: list[float] = Field(
        default_factory=lambda: [1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
    )
    B_max: int = Field(default=8, ge=1)
    ratio_band: float = Field(
        default=5.0, gt=1, description="Allowed spread of fraction / c across c_grid."
    )


class DiophSuiteConfig(_Section):
    genericity: GenericityConfig | None = Field(
        default_factory=GenericityConfig,
        description="Monte-Carlo genericity run; null to skip.",
    )


class SimulateConfig(_Section):
    rate: RateChoice = Field(
        default="dominant", description="Rate equation integrated by simulate-rate."
    )
    T: float = Field(default=1.0, gt=0)
    steps: int = Field(default=400, ge=1)
    steps_per_period: int = Field(default=32, ge=4)


class ExperimentConfig(_Section):
    """Everything a study needs: the system, the field, the eps grid and per-study knobs."""

    experiment: StudyKind | None = Field(
        default=None, description="Study selector; set by the CLI subcommand."
    )
    system: LevelSystem | None = Field(
        default=None, description="Inline level system."
    )
    family: FamilyConfig | None = Field(
        default=None, description="Generated level system (exclusive with system)."
    )
    field: QuasiPeriodicField = Field(description="Forcing field.")
    scaling: ScalingGrid
    solver: SolverConfig = Field(default_factory=SolverConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    dioph: DiophParams = Field(default_factory=DiophParams)
    seed: int = Field(default=0, ge=0, lt=2**64, description="RNG seed.")
    jobs: int = Field(default=1, ge=1, description="Worker processes.")
    converge: ConvergeConfig = Field(default_factory=ConvergeConfig)
    average_oracle: AverageOracleConfig = Field(default_factory=AverageOracleConfig)
    timelayer: TimelayerConfig = Field(default_factory=TimelayerConfig)
    equilibrium: EquilibriumConfig = Field(default_factory=EquilibriumConfig)
    dioph_suite: DiophSuiteConfig = Field(default_factory=DiophSuiteConfig)
    simulate: SimulateConfig = Field(default_factory=SimulateConfig)

    @model_validator(mode="after")
    def _check_levels(self) -> Self:
        if (self.system is None) == (self.family is None):
            raise ValueError("give exactly one of 'system' and 'family'.")
        N = self.N
        pops = self.initial.populations
        if pops is not None and len(pops) != N:
            raise ValueError(f"initial.populations has {len(pops)} entries, expected {N}.")
        return self

    @property
    def N(self) -> int:
        if self.system is not None:
            return self.system.N
        assert self.family is not None
        return self.family.N

    def level_system(self) -> LevelSystem:
        if self.system is not None:
            return self.system
        assert self.family is not None
        return self.family.rule.build(self.family.N)

    def initial_populations(self) -> Populations:
        if self.initial.populations is not None:
            return Populations.of(self.initial.populations)
        if self.family is not None:
            return self.family.rule.populations(self.family.N)
        values = [0.0] * self.N
        values[0] = 1.0
        return Populations.of(values)
