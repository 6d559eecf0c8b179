"""Fully connected ReLU scorer with a paired-block initialization.

The scorer maps a context vector to a scalar through ``depth - 1`` hidden
ReLU layers of equal width followed by a linear read-out scaled by
``sqrt(hidden_width)``.  Parameters live in a single flat vector; the
per-layer matrices are column-major views into it, so flat and matrix
representations always alias the same storage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError

__all__ = [
    "NetworkConfig",
    "NetworkParams",
    "init_params",
    "forward",
    "forward_many",
    "gradient",
    "gradient_many",
    "axpy",
    "param_distance",
]


@dataclass(frozen=True)
class NetworkConfig:
    """Shape of the scorer: input dim, hidden width, total layer count."""

    input_dim: int
    hidden_width: int
    depth: int = 2

    def __post_init__(self):
        d, m, L = self.input_dim, self.hidden_width, self.depth
        if not (isinstance(d, int) and d >= 2 and d % 2 == 0):
            raise ConfigurationError(f"input_dim must be an even integer >= 2, got {d}")
        if not (isinstance(m, int) and m >= 2 and m % 2 == 0):
            raise ConfigurationError(f"hidden_width must be an even integer >= 2, got {m}")
        if not (isinstance(L, int) and L >= 2):
            raise ConfigurationError(f"depth must be an integer >= 2, got {L}")

    @property
    def layer_shapes(self) -> tuple[tuple[int, int], ...]:
        d, m, L = self.input_dim, self.hidden_width, self.depth
        return ((m, d),) + ((m, m),) * (L - 2) + ((1, m),)

    @property
    def param_count(self) -> int:
        return sum(r * c for r, c in self.layer_shapes)


def _as_matrix_views(config: NetworkConfig, flat: np.ndarray) -> tuple[np.ndarray, ...]:
    views = []
    lo = 0
    for rows, cols in config.layer_shapes:
        hi = lo + rows * cols
        views.append(flat[lo:hi].reshape((rows, cols), order="F"))
        lo = hi
    return tuple(views)


@dataclass(frozen=True)
class NetworkParams:
    """Immutable parameter bundle backed by one flat float64 vector.

    Layout: each layer matrix vectorized column by column, layers in
    forward order.  ``matrices()`` returns read-only views, never copies.
    """

    config: NetworkConfig
    flat: np.ndarray

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=np.float64)
        if flat.ndim != 1 or flat.shape[0] != self.config.param_count:
            raise ShapeError(
                f"flat vector has length {flat.shape}, expected ({self.config.param_count},)"
            )
        if flat is not self.flat or flat.flags.writeable:
            flat = flat.copy()
            flat.setflags(write=False)
            object.__setattr__(self, "flat", flat)

    def matrices(self) -> tuple[np.ndarray, ...]:
        return _as_matrix_views(self.config, self.flat)

    @classmethod
    def from_matrices(cls, config: NetworkConfig, mats) -> "NetworkParams":
        if len(mats) != len(config.layer_shapes):
            raise ShapeError(f"expected {len(config.layer_shapes)} matrices, got {len(mats)}")
        flat = np.empty(config.param_count)
        for view, mat in zip(_as_matrix_views(config, flat), mats):
            mat = np.asarray(mat, dtype=np.float64)
            if mat.shape != view.shape:
                raise ShapeError(f"layer shape {mat.shape} != expected {view.shape}")
            view[...] = mat
        flat.setflags(write=False)
        return cls(config, flat)


def init_params(config: NetworkConfig, rng: np.random.Generator) -> NetworkParams:
    """Draw starting weights with the paired-block structure.

    Every hidden layer is block diagonal, the same Gaussian block repeated
    on both halves; the read-out row is one Gaussian half followed by its
    negation.  Any input whose two halves are equal therefore scores exactly
    zero at these weights.  Hidden block entries use variance
    ``4 / hidden_width``: the duplication halves each block's width, so the
    doubled variance keeps the wide-network tangent kernel identical to an
    unpaired dense layer of full width.  The read-out half uses variance
    ``1 / hidden_width``.
    """
    m = config.hidden_width
    hidden_sd = 2.0 / math.sqrt(m)
    mats = []
    for rows, cols in config.layer_shapes[:-1]:
        block = rng.normal(0.0, hidden_sd, size=(rows // 2, cols // 2))
        W = np.zeros((rows, cols))
        W[: rows // 2, : cols // 2] = block
        W[rows // 2 :, cols // 2 :] = block
        mats.append(W)
    half = rng.normal(0.0, 1.0 / math.sqrt(m), size=m // 2)
    mats.append(np.concatenate([half, -half])[None, :])
    return NetworkParams.from_matrices(config, mats)


def _check_context(config: NetworkConfig, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (config.input_dim,):
        raise ShapeError(f"context has shape {x.shape}, expected ({config.input_dim},)")
    return x


def forward(params: NetworkParams, x) -> float:
    """Scalar score sqrt(m) * W_L relu(... relu(W_1 x))."""
    x = _check_context(params.config, x)
    mats = params.matrices()
    h = x
    for W in mats[:-1]:
        h = np.maximum(W @ h, 0.0)
    return float(math.sqrt(params.config.hidden_width) * (mats[-1] @ h)[0])


def forward_many(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Scores for a batch of contexts, rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.config.input_dim:
        raise ShapeError(f"batch has shape {X.shape}, expected (n, {params.config.input_dim})")
    mats = params.matrices()
    H = X
    for W in mats[:-1]:
        H = np.maximum(H @ W.T, 0.0)
    return math.sqrt(params.config.hidden_width) * (H @ mats[-1][0])


def gradient(params: NetworkParams, x) -> np.ndarray:
    """Exact reverse-mode gradient of ``forward`` w.r.t. the flat vector.

    The ReLU subgradient at exactly zero is taken as zero, so units that
    never activate contribute nothing.
    """
    x = _check_context(params.config, x)
    config = params.config
    mats = params.matrices()
    L = config.depth
    sqm = math.sqrt(config.hidden_width)

    acts = [x]
    pres = []
    h = x
    for W in mats[:-1]:
        z = W @ h
        pres.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)

    out = np.empty(config.param_count)
    views = _as_matrix_views(config, out)
    views[-1][0, :] = sqm * acts[-1]
    u = sqm * mats[-1][0]
    for layer in range(L - 2, -1, -1):
        u = u * (pres[layer] > 0.0)
        np.outer(u, acts[layer], out=views[layer])
        if layer > 0:
            u = mats[layer].T @ u
    return out


def gradient_many(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Stacked gradients, one row per context row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((X.shape[0], params.config.param_count))
    for i in range(X.shape[0]):
        out[i] = gradient(params, X[i])
    return out


def axpy(params: NetworkParams, direction: np.ndarray, step: float) -> NetworkParams:
    """New params with flat vector ``flat + step * direction``."""
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != params.flat.shape:
        raise ShapeError(
            f"direction has shape {direction.shape}, expected {params.flat.shape}"
        )
    return NetworkParams(params.config, params.flat + step * direction)


def param_distance(a: NetworkParams, b: NetworkParams) -> float:
    """Euclidean distance between two flat parameter vectors."""
    if a.flat.shape != b.flat.shape:
        raise ShapeError(f"parameter lengths differ: {a.flat.shape} vs {b.flat.shape}")
    return float(np.linalg.norm(a.flat - b.flat))
