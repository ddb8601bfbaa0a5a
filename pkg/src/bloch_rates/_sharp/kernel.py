"""Stable blocks, kernels and equilibria of rate generators."""

from __future__ import annotations

from logging import getLogger
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import svd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import softmax

from bloch_rates._model.state import Populations
from bloch_rates._sharp.operator import RateMatrix, SharpOperator, sharpen
from bloch_rates._util.constants import KERNEL_RTOL
from bloch_rates._util.error import KernelError, PropertyPError

logger = getLogger(__name__)


def stable_blocks(A: RateMatrix) -> list[list[int]]:
    """Connected components of the nonzero pattern of ``A`` (0-based, sorted).

    Each component spans a minimal ``A#``-stable subspace; singletons are
    levels whose population never changes.

    Raises:
        PropertyPError: If ``A(n,m) != 0`` while ``A(m,n) == 0`` for some pair.
    """
    pattern = A.pattern()
    if not np.array_equal(pattern, pattern.T):
        n, m = np.argwhere(pattern != pattern.T)[0]
        raise PropertyPError(
            f"rate table lacks property (P): A({n + 1},{m + 1}) and A({m + 1},{n + 1}) differ in support."
        )
    _, labels = connected_components(csr_matrix(pattern), directed=False)
    blocks: dict[int, list[int]] = {}
    for index, label in enumerate(labels):
        blocks.setdefault(int(label), []).append(index)
    return sorted(blocks.values(), key=lambda block: block[0])


def kernel_basis(
    matrix: NDArray[np.float64], rtol: float = KERNEL_RTOL
) -> NDArray[np.float64]:
    """Orthonormal kernel basis (columns) from the SVD of ``matrix``."""
    if matrix.size == 0:
        return np.zeros((matrix.shape[1], 0))
    _, sigma, vh = svd(matrix)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.eye(matrix.shape[1])
    rank = int(np.sum(sigma > rtol * sigma[0]))
    return vh[rank:].T.copy()


def equilibrium_state(A: RateMatrix, rho0: Populations | ArrayLike) -> Populations:
    """The equilibrium reached from ``rho0``: one kernel vector per block, block mass kept.

    Raises:
        KernelError: If a block of two or more levels has a kernel of
            dimension other than one.
    """
    if not isinstance(rho0, Populations):
        rho0 = Populations.of(rho0)
    if rho0.N != A.N:
        raise ValueError(f"dimension mismatch: populations {rho0.N} for N={A.N}.")
    M = sharpen(A).matrix
    result = np.array(rho0.values, dtype=float)
    for block in stable_blocks(A):
        if len(block) == 1:
            continue
        idx = np.asarray(block)
        basis = kernel_basis(M[np.ix_(idx, idx)])
        if basis.shape[1] != 1:
            raise KernelError(
                f"block {[i + 1 for i in block]} has kernel dimension {basis.shape[1]}, expected 1."
            )
        vector = basis[:, 0]
        vector = vector * np.sign(vector.sum())
        vector = np.clip(vector, 0.0, None)
        result[idx] = vector * (rho0.values[idx].sum() / vector.sum())
    return Populations.of(result)


def thermodynamic_equilibrium(omega: Sequence[float] | ArrayLike, T: float) -> Populations:
    """Gibbs populations ``exp(-omega(n)/T) / sum_k exp(-omega(k)/T)``."""
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}.")
    return Populations.of(softmax(-np.asarray(omega, dtype=float) / T))


class SpectralReport(BaseModel):
    """Spectrum of a generator; ``passed`` compares against ``tolerance * scale``."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eigenvalues_real: list[float]
    eigenvalues_imag: list[float]
    max_real_part: float = Field(description="Largest real part of an eigenvalue.")
    scale: float = Field(default=1.0, description="1 + max |M|, the size of the generator.")
    kernel_dimensions: list[int] = Field(
        description="Kernel dimension of the generator restricted to each stable block."
    )
    blocks: list[list[int]] = Field(description="Stable blocks, 1-based.")
    max_rayleigh_quotient: float | None = None
    tolerance: float = 1e-10

    @property
    def relative_max_real_part(self) -> float:
        return self.max_real_part / self.scale

    @property
    def passed(self) -> bool:
        bound = self.tolerance * self.scale
        ok = self.max_real_part <= bound
        if self.max_rayleigh_quotient is not None:
            ok = ok and self.max_rayleigh_quotient <= bound
        return ok and all(
            dim == 1 for dim, block in zip(self.kernel_dimensions, self.blocks) if len(block) > 1
        )


def spectral_check(
    op: SharpOperator,
    symmetric: bool,
    samples: int = 200,
    seed: int = 0,
    tolerance: float = 1e-10,
) -> SpectralReport:
    """Eigenvalue, kernel and Rayleigh quotient diagnostics of a generator."""
    eigenvalues = np.linalg.eigvals(op.matrix) if op.N else np.zeros(0)
    scale = 1.0 + float(np.max(np.abs(op.matrix))) if op.N else 1.0
    blocks = stable_blocks(op.rates())
    dims: list[int] = []
    for block in blocks:
        idx = np.asarray(block)
        sub = op.matrix[np.ix_(idx, idx)]
        dims.append(kernel_basis(sub).shape[1])
    rayleigh: float | None = None
    if symmetric and op.N:
        rng = np.random.default_rng(seed)
        vectors = rng.standard_normal((samples, op.N))
        quotients = np.einsum("ij,jk,ik->i", vectors, op.matrix, vectors) / np.einsum(
            "ij,ij->i", vectors, vectors
        )
        rayleigh = float(quotients.max())
    return SpectralReport(
        eigenvalues_real=[float(x) for x in np.real(eigenvalues)],
        eigenvalues_imag=[float(x) for x in np.imag(eigenvalues)],
        max_real_part=float(np.max(np.real(eigenvalues))) if op.N else 0.0,
        scale=scale,
        kernel_dimensions=dims,
        blocks=[[i + 1 for i in block] for block in blocks],
        max_rayleigh_quotient=rayleigh,
        tolerance=tolerance,
    )


def kernel_degeneration(
    build: Callable[[int], RateMatrix], sizes: Sequence[int]
) -> list[tuple[int, float]]:
    """Smallest nonzero singular value of ``A#`` for a family of growing tables.

    On a family whose infinite limit has no equilibrium the values drift to
    zero; a finite run can only show the trend.
    """
    rows: list[tuple[int, float]] = []
    for size in sizes:
        M = sharpen(build(size)).matrix
        sigma = svd(M, compute_uv=False)
        nonzero = sigma[sigma > KERNEL_RTOL * sigma[0]] if sigma[0] > 0 else sigma[:0]
        value = float(nonzero.min()) if nonzero.size else 0.0
        logger.debug(f"kernel degeneration N={size}: sigma_min={value:.3e}")
        rows.append((size, value))
    return rows
