"""Rate tables and the generators they induce.

A rate table ``A`` holds nonnegative transition coefficients with ``A(k, n)``
the flow from level ``k`` into level ``n``. Its generator ``A#`` acts on
population vectors::

    A#(n, k) = A(k, n)                 n != k
    A#(n, n) = -sum_{m != n} A(n, m)

so every column of ``A#`` sums to zero and total population is conserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import eigh, expm

from bloch_rates._util.constants import PATTERN_RTOL


def _readonly(arr: NDArray[np.float64]) -> NDArray[np.float64]:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RateMatrix:
    entries: NDArray[np.float64]

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"rate table must be square, got {entries.shape}.")
        if not np.all(np.isfinite(entries)):
            raise ValueError("rate table contains non-finite entries.")
        if np.any(np.diag(entries) != 0.0):
            raise ValueError("rate table must have a zero diagonal.")
        if np.any(entries < 0):
            n, m = np.unravel_index(np.argmin(entries), entries.shape)
            raise ValueError(
                f"negative rate A({n + 1},{m + 1}) = {entries[n, m]:.3e}."
            )
        object.__setattr__(self, "entries", _readonly(entries))

    @classmethod
    def of(cls, entries: ArrayLike) -> RateMatrix:
        """Build from any table, zeroing its diagonal."""
        arr = np.array(entries, dtype=float, copy=True)
        np.fill_diagonal(arr, 0.0)
        return cls(arr)

    @classmethod
    def zeros(cls, N: int) -> RateMatrix:
        return cls(np.zeros((N, N)))

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        scale = float(np.max(self.entries)) if self.entries.size else 0.0
        return bool(np.all(np.abs(self.entries - self.entries.T) <= rtol * (1 + scale)))

    def pattern(self) -> NDArray[np.bool_]:
        """Structural nonzeros, ignoring entries below 1e-14 * max|A|."""
        scale = float(np.max(self.entries)) if self.entries.size else 0.0
        if scale == 0.0:
            return np.zeros(self.entries.shape, dtype=bool)
        return self.entries > PATTERN_RTOL * scale

    def has_property_p(self) -> bool:
        """A(n,m) = 0 exactly when A(m,n) = 0."""
        pattern = self.pattern()
        return bool(np.array_equal(pattern, pattern.T))

    def __add__(self, other: RateMatrix) -> RateMatrix:
        if other.N != self.N:
            raise ValueError(f"dimension mismatch: {self.N} vs {other.N}.")
        return RateMatrix(self.entries + other.entries)

    def scaled(self, factor: float) -> RateMatrix:
        if factor < 0:
            raise ValueError("rate tables can only be scaled by nonnegative factors.")
        return RateMatrix(self.entries * factor)

    def restrict(self, indices: list[int]) -> RateMatrix:
        idx = np.asarray(indices, dtype=int)
        return RateMatrix(self.entries[np.ix_(idx, idx)])


@dataclass(frozen=True)
class SharpOperator:
    matrix: NDArray[np.float64]
    symmetric: bool = False

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"generator must be square, got {matrix.shape}.")
        object.__setattr__(self, "matrix", _readonly(matrix))

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    def rates(self) -> RateMatrix:
        """Recover the rate table from the off-diagonal part."""
        return RateMatrix.of(self.matrix.T)

    def generator_norm_bound(self) -> float:
        """Bound on the operator norm of the generator on every l^q, 1 <= q <= inf.

        ``mixed_norm`` bounds the l^inf norm; the l^1 norm is twice the
        largest row sum, which only coincides with it for symmetric tables.
        Interpolation covers the q in between.
        """
        rates = self.rates()
        row_sum = float(rates.entries.sum(axis=1).max()) if self.N else 0.0
        return max(mixed_norm(rates), 2.0 * row_sum)


def sharpen(A: RateMatrix) -> SharpOperator:
    """Build the population generator ``A#`` of a rate table."""
    M = A.entries.T - np.diag(A.entries.sum(axis=1))
    return SharpOperator(M, symmetric=A.is_symmetric())


def apply_sharp(op: SharpOperator, v: ArrayLike) -> NDArray[np.float64]:
    vec = np.asarray(v, dtype=float)
    if vec.shape != (op.N,):
        raise ValueError(f"dimension mismatch: vector {vec.shape} for N={op.N}.")
    return op.matrix @ vec


def mixed_norm(A: RateMatrix | ArrayLike) -> float:
    """``sup_k sum_n |A(n,k)| + sup_n sum_k |A(n,k)|``; bounds ``A#`` on every l^q."""
    entries = A.entries if isinstance(A, RateMatrix) else np.asarray(A)
    if entries.size == 0:
        return 0.0
    absolute = np.abs(entries)
    return float(absolute.sum(axis=0).max() + absolute.sum(axis=1).max())


def schur_apply(A: ArrayLike, u: ArrayLike) -> NDArray[np.complex128]:
    """``(n, m) -> sum_k A(n,k) u(k,m) - A(k,m) u(n,k)``, i.e. the commutator ``[A, u]``."""
    a = np.asarray(A.entries if isinstance(A, RateMatrix) else A, dtype=complex)
    x = np.asarray(u, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or x.shape != a.shape:
        raise ValueError(f"dimension mismatch: A {a.shape}, u {x.shape}.")
    return a @ x - x @ a


def evolve_sharp(op: SharpOperator, v: ArrayLike, t: float) -> NDArray[np.float64]:
    """``exp(t A#) v``."""
    if t < 0:
        raise ValueError(f"evolution time must be nonnegative, got {t}.")
    vec = np.asarray(v, dtype=float)
    if vec.shape != (op.N,):
        raise ValueError(f"dimension mismatch: vector {vec.shape} for N={op.N}.")
    if t == 0:
        return vec.copy()
    if op.symmetric:
        eigvals, eigvecs = eigh(op.matrix)
        return eigvecs @ (np.exp(t * eigvals) * (eigvecs.T @ vec))
    return expm(t * op.matrix) @ vec


def propagator(op: SharpOperator | NDArray[np.float64], t: float) -> NDArray[np.float64]:
    """Dense ``exp(t M)`` for a generator matrix."""
    if t < 0:
        raise ValueError(f"evolution time must be nonnegative, got {t}.")
    if isinstance(op, SharpOperator):
        matrix, symmetric = op.matrix, op.symmetric
    else:
        matrix = np.asarray(op, dtype=float)
        symmetric = bool(np.allclose(matrix, matrix.T, rtol=0, atol=1e-14))
    if symmetric:
        eigvals, eigvecs = eigh(matrix)
        return (eigvecs * np.exp(t * eigvals)) @ eigvecs.T
    return expm(t * matrix)
