"""bloch_rates: Bloch equations, their rate-equation limits and the studies that compare them."""

try:
    from ._version import __version__
except ImportError:  # pragma: no cover
    __version__ = "unknown"

from bloch_rates._bloch.diagnostics import (
    ConservationReport,
    coherence_norm_series,
    conservation_diagnostics,
    write_trajectory_csv,
)
from bloch_rates._bloch.solver import (
    BlochTrajectory,
    SolverConfig,
    bloch_rhs,
    integrate_bloch,
)
from bloch_rates._config.load import ConfigOptions, config_from_dict, load_config
from bloch_rates._config.write import config_to_yaml
from bloch_rates._dioph.checks import (
    DiophParams,
    DiophReport,
    PerturbedReport,
    SpeedReport,
    check_dioph,
    check_speed,
    estimate_C_eta,
    perturbed_violations,
)
from bloch_rates._dioph.genericity import GenericityRow, genericity_experiment
from bloch_rates._model.family import LevelFamily
from bloch_rates._model.field import FourierMode, QuasiPeriodicField, field_value
from bloch_rates._model.scaling import Scaling
from bloch_rates._model.state import DensityMatrix, Populations, well_prepared_state
from bloch_rates._model.system import (
    LevelSystem,
    ValidationReport,
    pauli_rates,
    validate_system,
)
from bloch_rates._rate_solver.integrate import (
    PopulationTrajectory,
    integrate_rate,
    integrate_rate_oscillating,
)
from bloch_rates._rate_solver.layers import (
    LayeredSolution,
    LayerFit,
    ProjectorSet,
    build_projectors,
    check_gap_bound,
    kernel_blocks,
    limit_system,
    lumped_rate,
    solve_layered,
    spectral_gap_c,
    timelayer_analysis,
)
from bloch_rates._rate_solver.truncation import (
    TruncationChoice,
    choose_N,
    truncate,
    truncation_error,
)
from bloch_rates._rates.psi import (
    ResonanceSet,
    average_oracle,
    psi_averaged,
    psi_dominant,
    psi_time_dependent,
    resonance_set,
    w_mod,
)
from bloch_rates._rates.regime import (
    RateSplit,
    RegimeInfo,
    psi_app,
    regime_classify,
    regime_for,
    split_AB,
)
from bloch_rates._sharp.kernel import (
    SpectralReport,
    equilibrium_state,
    kernel_degeneration,
    spectral_check,
    stable_blocks,
    thermodynamic_equilibrium,
)
from bloch_rates._sharp.operator import (
    RateMatrix,
    SharpOperator,
    apply_sharp,
    evolve_sharp,
    mixed_norm,
    propagator,
    schur_apply,
    sharpen,
)
from bloch_rates._studies.averaging import run_averaging_oracle
from bloch_rates._studies.convergence import run_convergence_study
from bloch_rates._studies.dioph import run_dioph_suite
from bloch_rates._studies.equilibrium import run_equilibrium_study
from bloch_rates._studies.output import StudyOutput, write_study
from bloch_rates._studies.run import run_study
from bloch_rates._studies.timelayer import run_timelayer_study
from bloch_rates._types.experiment import ExperimentConfig, StudyKind
from bloch_rates._types.results import SlopeFit, StudyResult
from bloch_rates._util.error import (
    BlochRatesError,
    IntegrationError,
    KernelError,
    NoLayerError,
    PropertyPError,
    RegimeError,
    StudyError,
    TruncationError,
)

__all__ = [
    "__version__",
    "BlochRatesError",
    "BlochTrajectory",
    "ConfigOptions",
    "ConservationReport",
    "DensityMatrix",
    "DiophParams",
    "DiophReport",
    "ExperimentConfig",
    "FourierMode",
    "GenericityRow",
    "IntegrationError",
    "KernelError",
    "LayerFit",
    "LayeredSolution",
    "LevelFamily",
    "LevelSystem",
    "NoLayerError",
    "PerturbedReport",
    "PopulationTrajectory",
    "Populations",
    "ProjectorSet",
    "PropertyPError",
    "QuasiPeriodicField",
    "RateMatrix",
    "RateSplit",
    "RegimeError",
    "RegimeInfo",
    "ResonanceSet",
    "Scaling",
    "SharpOperator",
    "SlopeFit",
    "SolverConfig",
    "SpectralReport",
    "SpeedReport",
    "StudyError",
    "StudyKind",
    "StudyOutput",
    "StudyResult",
    "TruncationChoice",
    "TruncationError",
    "ValidationReport",
    "apply_sharp",
    "average_oracle",
    "bloch_rhs",
    "build_projectors",
    "check_dioph",
    "check_gap_bound",
    "check_speed",
    "choose_N",
    "config_from_dict",
    "coherence_norm_series",
    "config_to_yaml",
    "conservation_diagnostics",
    "equilibrium_state",
    "estimate_C_eta",
    "evolve_sharp",
    "field_value",
    "genericity_experiment",
    "integrate_bloch",
    "integrate_rate",
    "integrate_rate_oscillating",
    "kernel_blocks",
    "kernel_degeneration",
    "limit_system",
    "load_config",
    "lumped_rate",
    "mixed_norm",
    "pauli_rates",
    "perturbed_violations",
    "propagator",
    "psi_app",
    "psi_averaged",
    "psi_dominant",
    "psi_time_dependent",
    "regime_classify",
    "regime_for",
    "resonance_set",
    "run_averaging_oracle",
    "run_convergence_study",
    "run_dioph_suite",
    "run_equilibrium_study",
    "run_study",
    "run_timelayer_study",
    "schur_apply",
    "sharpen",
    "solve_layered",
    "spectral_check",
    "spectral_gap_c",
    "split_AB",
    "stable_blocks",
    "thermodynamic_equilibrium",
    "timelayer_analysis",
    "truncate",
    "truncation_error",
    "validate_system",
    "well_prepared_state",
    "w_mod",
    "write_study",
    "write_trajectory_csv",
]
