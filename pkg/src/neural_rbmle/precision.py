"""Ridge-seeded precision matrix with rank-one updates.

Tracks Z = ridge * I + sum of outer(g, g) / m over played rounds, either as
the full matrix or as its diagonal only.  Diagonal mode solves in O(p);
full mode is exact and affordable in long runs through ``CholeskyFactor``,
which maintains the triangular factor incrementally (O(p^2) per update and
solve instead of O(p^3) refactorizations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import ConfigurationError, NumericError, ShapeError

__all__ = ["PrecisionMatrix", "CholeskyFactor", "update_precision", "solve_precision"]

MODES = ("full", "diagonal")


@dataclass(frozen=True)
class PrecisionMatrix:
    """Immutable snapshot; updates return a fresh value."""

    mode: str
    data: np.ndarray  # (p, p) for full, (p,) for diagonal
    ridge: float

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.ridge <= 0:
            raise ConfigurationError(f"ridge must be positive, got {self.ridge}")
        data = np.asarray(self.data, dtype=np.float64)
        expected_ndim = 2 if self.mode == "full" else 1
        if data.ndim != expected_ndim:
            raise ShapeError(f"{self.mode} mode expects a {expected_ndim}-d array")
        if self.mode == "full" and data.shape[0] != data.shape[1]:
            raise ShapeError(f"full matrix must be square, got {data.shape}")
        if data.flags.writeable or data is not self.data:
            data = data.copy()
            data.setflags(write=False)
            object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def identity(cls, mode: str, dim: int, ridge: float) -> "PrecisionMatrix":
        if mode == "full":
            return cls(mode, ridge * np.eye(dim), ridge)
        return cls(mode, np.full(dim, ridge), ridge)


def update_precision(zprev: PrecisionMatrix, grad: np.ndarray, m: int) -> PrecisionMatrix:
    """Add the rank-one term outer(grad, grad) / m (diagonal: entrywise)."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (zprev.dim,):
        raise ShapeError(f"gradient has shape {grad.shape}, expected ({zprev.dim},)")
    if zprev.mode == "full":
        return PrecisionMatrix(zprev.mode, zprev.data + np.outer(grad, grad) / m, zprev.ridge)
    return PrecisionMatrix(zprev.mode, zprev.data + grad * grad / m, zprev.ridge)


def solve_precision(z: PrecisionMatrix, v: np.ndarray) -> np.ndarray:
    """Return Z^{-1} v via a symmetric positive-definite factorization."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (z.dim,):
        raise ShapeError(f"vector has shape {v.shape}, expected ({z.dim},)")
    if z.mode == "diagonal":
        return v / z.data
    try:
        factor = cho_factor(z.data, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"precision matrix is not positive definite: {exc}") from exc
    return cho_solve(factor, v, check_finite=False)


@njit(cache=True, fastmath=False)
def _chol_rank_one_update(L, x):
    """In place: L L^T + x x^T -> L' L'^T, lower triangular L.  x is scratch."""
    p = L.shape[0]
    for k in range(p):
        lkk = L[k, k]
        xk = x[k]
        r = math.sqrt(lkk * lkk + xk * xk)
        c = r / lkk
        s = xk / lkk
        L[k, k] = r
        for i in range(k + 1, p):
            L[i, k] = (L[i, k] + s * x[i]) / c
            x[i] = c * x[i] - s * L[i, k]


class CholeskyFactor:
    """Running lower-triangular factor of ridge*I + sum outer(g, g)/m.

    Positive rank-one updates only, so the classic Givens-style update is
    numerically stable; agreement with a fresh factorization of the
    assembled matrix is pinned by tests.
    """

    def __init__(self, dim: int, ridge: float):
        if dim < 1:
            raise ShapeError(f"dim must be >= 1, got {dim}")
        if ridge <= 0:
            raise ConfigurationError(f"ridge must be positive, got {ridge}")
        self.ridge = ridge
        self.lower = math.sqrt(ridge) * np.eye(dim)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def update(self, grad: np.ndarray, m: int) -> None:
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != (self.dim,):
            raise ShapeError(f"gradient has shape {grad.shape}, expected ({self.dim},)")
        _chol_rank_one_update(self.lower, grad / math.sqrt(m))

    def solve(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ShapeError(f"vector has shape {v.shape}, expected ({self.dim},)")
        w = solve_triangular(self.lower, v, lower=True, check_finite=False)
        return solve_triangular(self.lower, w, lower=True, trans="T", check_finite=False)

    def quad_form(self, v: np.ndarray) -> float:
        """v^T Z^{-1} v, via one triangular solve."""
        v = np.asarray(v, dtype=np.float64)
        w = solve_triangular(self.lower, v, lower=True, check_finite=False)
        return float(w @ w)

    def matrix(self) -> np.ndarray:
        return self.lower @ self.lower.T
