"""Monte-Carlo measure of frequency vectors that violate the small divisor inequality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from logging import getLogger
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict

from bloch_rates._dioph.checks import alpha_weight, level_weight, multi_indices
from bloch_rates._util.parallel import map_ordered

logger = getLogger(__name__)

GENERICITY_HEADER = ["c", "violation_fraction", "samples"]

# samples drawn from one spawned substream
SAMPLE_CHUNK = 1024


class GenericityRow(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    c: float
    violation_fraction: float
    samples: int


@dataclass(frozen=True)
class _ChunkTask:
    seed: np.random.SeedSequence
    size: int
    r: int
    ball_radius: float
    omega: NDArray[np.float64]
    alphas: NDArray[np.int64]
    eta: float


def sample_ball(
    rng: np.random.Generator, size: int, r: int, radius: float
) -> NDArray[np.float64]:
    """Uniform samples in the centered ball of ``R^r``."""
    directions = rng.standard_normal((size, r))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(size) ** (1.0 / r)
    return directions * radii[:, None]


def _chunk_margins(task: _ChunkTask) -> NDArray[np.float64]:
    rng = np.random.default_rng(task.seed)
    freqs = sample_ball(rng, task.size, task.r, task.ball_radius)
    omega_nk = task.omega.reshape(-1)
    weights = alpha_weight(task.alphas, task.eta)[:, None] * level_weight(
        task.omega.shape[0], task.eta
    ).reshape(1, -1)
    modes = freqs @ task.alphas.T
    margins = np.abs(modes[:, :, None] + omega_nk[None, None, :]) * weights[None]
    return margins.reshape(task.size, -1).min(axis=1)


def genericity_experiment(
    r: int,
    ball_radius: float,
    eta: float,
    omegas: Sequence[float] | ArrayLike,
    n_samples: int,
    c_grid: Sequence[float],
    seed: int,
    B_max: int = 8,
    jobs: int = 1,
) -> list[GenericityRow]:
    """Fraction of sampled frequency vectors for which some scanned ``(alpha, n, k)`` violates the inequality with constant ``c``.

    Each sampled vector is reduced to its weighted margin
    ``min |alpha.omega + omega(n,k)| (1+|alpha|)^(r-1+eta) (1+n)^(1+eta) (1+k)^(1+eta)``
    over ``0 < |alpha|_1 <= B_max`` and all pairs, so the fractions are
    nested in ``c``. Samples come in fixed-size chunks, each from its own
    substream of ``SeedSequence(seed)``, so the result does not depend on
    ``jobs``.
    """
    if r < 1:
        raise ValueError("r must be at least 1.")
    if ball_radius <= 0 or not math.isfinite(ball_radius):
        raise ValueError(f"ball_radius must be positive and finite, got {ball_radius}.")
    if n_samples < 100:
        raise ValueError(f"n_samples must be at least 100, got {n_samples}.")
    if not c_grid:
        raise ValueError("c_grid is empty.")
    if any(c < 0 for c in c_grid):
        raise ValueError("c_grid values must be nonnegative.")
    levels = np.asarray(omegas, dtype=float).reshape(-1)
    if levels.size == 0:
        raise ValueError("omegas is empty.")
    omega = levels[:, None] - levels[None, :]
    alphas = multi_indices(r, B_max)
    if alphas.shape[0] == 0:
        raise ValueError("B_max must be at least 1.")

    n_chunks = math.ceil(n_samples / SAMPLE_CHUNK)
    sizes = [SAMPLE_CHUNK] * (n_chunks - 1) + [n_samples - SAMPLE_CHUNK * (n_chunks - 1)]
    tasks = [
        _ChunkTask(
            seed=child,
            size=size,
            r=r,
            ball_radius=ball_radius,
            omega=omega,
            alphas=alphas,
            eta=eta,
        )
        for child, size in zip(np.random.SeedSequence(seed).spawn(n_chunks), sizes)
    ]
    margins = np.concatenate(map_ordered(_chunk_margins, tasks, jobs))
    logger.debug(
        f"genericity: {n_samples} samples in {n_chunks} chunks, min margin {margins.min():.3e}"
    )
    return [
        GenericityRow(
            c=float(c),
            violation_fraction=float(np.mean(margins < c)),
            samples=n_samples,
        )
        for c in c_grid
    ]


def genericity_rows(rows: Sequence[GenericityRow]) -> list[list[float | int]]:
    return [[row.c, row.violation_fraction, row.samples] for row in rows]
