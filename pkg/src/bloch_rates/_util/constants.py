from pathlib import Path

PKG_NAME = Path(__file__).parent.parent.stem

ENV_PREFIX = "BLOCH_RATES"

DEFAULT_LOG_LEVEL = "warning"

ALL_LOG_LEVELS = ["debug", "info", "warning", "error", "critical"]

# Exit code signalling that a study ran to completion but at least one of its
# checks failed. Distinct from exit code 1 (handled errors/exceptions) and exit
# code 2 (click's conventional usage-error code).
EXIT_CHECKS_FAILED = 3

# Hermiticity tolerance is HERMITIAN_RTOL * (1 + max|entry|).
HERMITIAN_RTOL = 1e-10

# Singular values below KERNEL_RTOL * sigma_max span the kernel.
KERNEL_RTOL = 1e-10

# Pattern entries below PATTERN_RTOL * max|A| are structural zeros.
PATTERN_RTOL = 1e-14

RESONANCE_RTOL = 1e-9

DELTA_RTOL = 1e-12

DEFAULT_H0 = 0.1

DEFAULT_SNAPSHOTS = 400

DEFAULT_ETA = 0.1

CHOOSE_N_CAP = 2**14

RESULT_FILE = "result.json"

SERIES_FILE = "series.csv"
