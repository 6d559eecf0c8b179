"""Infinite-width tangent kernel of the ReLU scorer, plus finite-width checks.

The kernel of an L-layer ReLU network has a closed form built from two
arc-cosine moments of a bivariate Gaussian; the recursion below propagates
covariances layer by layer and accumulates the tangent contributions.  The
module also provides the effective dimension of a kernel matrix and
diagnostics comparing the analytic kernel to what a sampled finite-width
network actually produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericError
from .net import NetworkConfig, NetworkParams, forward, gradient, gradient_many, init_params

__all__ = [
    "NtkMatrix",
    "arc_cosine_expectation",
    "ntk_matrix",
    "effective_dim",
    "linearization_error",
    "empirical_kernel",
]


@dataclass(frozen=True)
class NtkMatrix:
    """Symmetric PSD kernel matrix over a context list, plus its depth."""

    matrix: np.ndarray  # (N, N)
    depth: int
    min_eigenvalue: float

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.flags.writeable or mat is not self.matrix:
            mat = mat.copy()
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _arc_cosine_moments(s_ii, s_jj, s_ij):
    """Vectorized closed-form moments E[relu(u) relu(v)] and E[u>0][v>0]
    under a centered bivariate Gaussian with the given covariance entries,
    the second moment already marginalized (it is scale-free)."""
    scale = np.sqrt(s_ii * s_jj)
    cos_g = np.clip(s_ij / scale, -1.0, 1.0)
    g = np.arccos(cos_g)
    e_act = scale / (2.0 * math.pi) * (np.sin(g) + (math.pi - g) * cos_g)
    e_der = (math.pi - g) / (2.0 * math.pi)
    return e_act, e_der


def arc_cosine_expectation(s_ii: float, s_jj: float, s_ij: float) -> tuple[float, float]:
    """Scalar moments for one covariance triple; validates the 2x2 PSD box."""
    if s_ii <= 0.0 or s_jj <= 0.0:
        raise NumericError(f"variances must be positive, got ({s_ii}, {s_jj})")
    if abs(s_ij) > math.sqrt(s_ii * s_jj) + 1e-12:
        raise NumericError(f"covariance {s_ij} exceeds the PSD bound for ({s_ii}, {s_jj})")
    e_act, e_der = _arc_cosine_moments(np.float64(s_ii), np.float64(s_jj), np.float64(s_ij))
    return float(e_act), float(e_der)


def ntk_matrix(contexts: np.ndarray, depth: int) -> NtkMatrix:
    """Closed-form tangent kernel matrix for unit-norm contexts.

    Propagates the covariance matrix through depth-1 activation layers; the
    returned kernel is the average of the accumulated tangent sum and the
    final covariance.
    """
    X = np.asarray(contexts, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError(f"contexts must be a 2-d array, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ContractError("need at least one context")
    norms = np.linalg.norm(X, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ContractError("all contexts must have unit norm")
    if depth < 2:
        raise ContractError(f"depth must be >= 2, got {depth}")

    cov = X @ X.T
    tangent = cov.copy()
    for _ in range(depth - 1):
        diag = np.diag(cov).copy()
        e_act, e_der = _arc_cosine_moments(diag[:, None], diag[None, :], cov)
        cov = 2.0 * e_act
        tangent = 2.0 * tangent * e_der + cov
    H = (tangent + cov) / 2.0
    H = (H + H.T) / 2.0
    min_eig = float(np.linalg.eigvalsh(H)[0])
    if min_eig < -1e-8:
        raise NumericError(f"kernel matrix is not PSD (min eigenvalue {min_eig})")
    return NtkMatrix(H, depth, min_eig)


def effective_dim(H, ridge: float, n: int | None = None) -> float:
    """log det(I + H / ridge) / log(1 + n / ridge), via eigenvalues.

    ``n`` defaults to the matrix size; it is the normalizing count the
    caller measures dimension against.
    """
    if ridge <= 0:
        raise ContractError(f"ridge must be positive, got {ridge}")
    mat = H.matrix if isinstance(H, NtkMatrix) else np.asarray(H, dtype=np.float64)
    if n is None:
        n = mat.shape[0]
    eigs = np.linalg.eigvalsh(mat)
    if eigs[0] < -1e-8:
        raise NumericError(f"matrix is not PSD (min eigenvalue {eigs[0]})")
    eigs = np.clip(eigs, 0.0, None)
    return float(np.sum(np.log1p(eigs / ridge)) / math.log1p(n / ridge))


def linearization_error(params: NetworkParams, anchor: NetworkParams, x: np.ndarray) -> float:
    """|score(x; params) - <anchor tangent of x, params - anchor>|.

    How far the live score drifts from the anchor's first-order model; the
    anchor itself scores zero on duplicated-half contexts, so no constant
    term appears.
    """
    g0 = gradient(anchor, x)
    return abs(forward(params, x) - float(g0 @ (params.flat - anchor.flat)))


def empirical_kernel(contexts: np.ndarray, config: NetworkConfig,
                     rng: np.random.Generator, n_init: int = 1,
                     return_samples: bool = False):
    """Finite-width kernel estimate: tangent Gram matrix over freshly drawn
    starting weights, averaged over ``n_init`` draws (scaled by 1/width)."""
    X = np.asarray(contexts, dtype=np.float64)
    samples = np.empty((n_init, X.shape[0], X.shape[0]))
    for i in range(n_init):
        params = init_params(config, rng)
        G = gradient_many(params, X)
        samples[i] = (G @ G.T) / config.hidden_width
    mean = samples.mean(axis=0)
    if return_samples:
        return mean, samples
    return mean
