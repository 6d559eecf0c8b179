"""Bandit environments and context preprocessing.

Classification datasets become K-armed bandits by placing the raw feature
vector in one of K blocks (one candidate context per class); every context
the agents ever see is then duplicated and normalized so its two halves are
equal and its norm is one.  Synthetic environments draw fresh contexts on
the sphere each round and pay a noisy function of a hidden direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, ParseError

__all__ = [
    "Dataset",
    "load_dataset",
    "to_bandit_contexts",
    "preprocess_context",
    "preprocess_many",
    "EnvStep",
    "DatasetEnv",
    "dataset_env_step",
    "SyntheticEnv",
    "make_synthetic_env",
    "synthetic_env_step",
    "SYNTHETIC_KINDS",
]

SYNTHETIC_KINDS = ("linear", "quadratic", "cosine")


@dataclass(frozen=True)
class Dataset:
    """Labeled rows for the classification-to-bandit conversion."""

    features: np.ndarray  # (n, d_raw)
    labels: np.ndarray  # (n,) ints in [0, n_classes)
    n_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ContractError("dataset needs at least one feature row")
        if self.labels.shape != (self.features.shape[0],):
            raise ContractError("labels and features disagree in length")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ContractError("labels outside [0, n_classes)")

    @property
    def raw_dim(self) -> int:
        return self.features.shape[1]

    @property
    def context_dim(self) -> int:
        return 2 * self.raw_dim * self.n_classes

    def __len__(self) -> int:
        return self.features.shape[0]


def load_dataset(path: str, format: str = "csv_label_first") -> Dataset:
    """Parse a CSV with an integer class label first on every row."""
    if format != "csv_label_first":
        raise ConfigurationError(f"unknown dataset format {format!r}")
    labels: list[int] = []
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
                if width < 2:
                    raise ParseError(f"row {lineno}: need a label and at least one feature",
                                     row=lineno)
            elif len(parts) != width:
                raise ParseError(
                    f"row {lineno}: expected {width} fields, got {len(parts)}", row=lineno)
            try:
                label = int(parts[0])
                feats = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"row {lineno}: {exc}", row=lineno) from exc
            if label < 0:
                raise ParseError(f"row {lineno}: negative label {label}", row=lineno)
            if not all(math.isfinite(v) for v in feats):
                raise ParseError(f"row {lineno}: non-finite feature", row=lineno)
            labels.append(label)
            rows.append(feats)
    if not rows:
        raise ParseError("empty dataset file")
    return Dataset(np.array(rows), np.array(labels, dtype=np.int64), max(labels) + 1)


def to_bandit_contexts(features: np.ndarray, n_arms: int) -> np.ndarray:
    """One candidate context per arm: the features in arm i's block, zeros elsewhere."""
    if n_arms < 2:
        raise ContractError(f"need at least two arms, got {n_arms}")
    features = np.asarray(features, dtype=np.float64)
    raw = features.shape[0]
    out = np.zeros((n_arms, raw * n_arms))
    for i in range(n_arms):
        out[i, i * raw : (i + 1) * raw] = features
    return out


def preprocess_context(x: np.ndarray) -> np.ndarray:
    """Duplicate and normalize: (x, x) / (sqrt(2) ||x||), unit norm, equal halves.

    The all-zero vector (which cannot be normalized) maps to the duplicated
    first basis vector, keeping the output contract intact.
    """
    x = np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        x = np.zeros_like(x)
        x[0] = 1.0
        norm = 1.0
    return np.concatenate([x, x]) / (math.sqrt(2.0) * norm)


def preprocess_many(X: np.ndarray) -> np.ndarray:
    """Row-wise ``preprocess_context``."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        X = X.copy()
        X[zero, :] = 0.0
        X[zero, 0] = 1.0
        norms = np.where(zero, 1.0, norms)
    return np.hstack([X, X]) / (math.sqrt(2.0) * norms[:, None])


@dataclass(frozen=True)
class EnvStep:
    """Everything one round emits, before the agent chooses.

    ``rewards`` holds a realized draw for every arm; only the chosen entry
    is revealed to the agent.  ``mean_rewards`` backs the regret accounting.
    """

    contexts: np.ndarray  # (K, d)
    mean_rewards: np.ndarray  # (K,)
    rewards: np.ndarray  # (K,)
    optimal_mean: float


class DatasetEnv:
    """Classification rows served in a per-trial shuffled order.

    Reward is 1 for naming the row's class, 0 otherwise.  When the rows run
    out the trial either stops (default) or wraps around, per ``wrap``.
    """

    def __init__(self, dataset: Dataset, rng: np.random.Generator, wrap: bool = False):
        self.dataset = dataset
        self.wrap = wrap
        self._order = rng.permutation(len(dataset))
        # Context layout is fixed per row; cache nothing, rows are cheap.

    @property
    def context_dim(self) -> int:
        return self.dataset.context_dim

    @property
    def n_arms(self) -> int:
        return self.dataset.n_classes

    def step(self, t: int) -> EnvStep | None:
        """Emit round t (1-based); None when the dataset is exhausted."""
        if t < 1:
            raise ContractError(f"round index must be >= 1, got {t}")
        idx = t - 1
        if idx >= len(self.dataset):
            if not self.wrap:
                return None
            idx %= len(self.dataset)
        row = self._order[idx]
        contexts = preprocess_many(
            to_bandit_contexts(self.dataset.features[row], self.dataset.n_classes))
        means = np.zeros(self.dataset.n_classes)
        means[self.dataset.labels[row]] = 1.0
        return EnvStep(contexts, means, means.copy(), 1.0)


def dataset_env_step(env: DatasetEnv, t: int) -> EnvStep | None:
    """Functional alias for ``env.step``."""
    return env.step(t)


@dataclass(frozen=True)
class SyntheticEnv:
    """Fresh spherical contexts each round, mean reward a function of a
    hidden unit direction, Gaussian noise on top."""

    kind: str
    hidden: np.ndarray  # (d,), unit norm
    noise_sigma: float
    n_arms: int
    context_dim: int  # d, after duplication

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ConfigurationError(f"kind must be one of {SYNTHETIC_KINDS}, got {self.kind!r}")
        if self.noise_sigma < 0:
            raise ConfigurationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if abs(float(np.linalg.norm(self.hidden)) - 1.0) > 1e-9:
            raise ContractError("hidden direction must have unit norm")

    def mean_reward(self, contexts: np.ndarray) -> np.ndarray:
        s = np.asarray(contexts, dtype=np.float64) @ self.hidden
        if self.kind == "linear":
            return (s + 1.0) / 2.0
        if self.kind == "quadratic":
            return np.square(s)
        return (np.cos(3.0 * s) + 1.0) / 2.0


def make_synthetic_env(kind: str, raw_dim: int, n_arms: int, noise_sigma: float,
                       rng: np.random.Generator) -> SyntheticEnv:
    """Draw the hidden direction for one trial."""
    d = 2 * raw_dim
    hidden = rng.normal(size=d)
    hidden /= np.linalg.norm(hidden)
    return SyntheticEnv(kind, hidden, noise_sigma, n_arms, d)


def synthetic_env_step(env: SyntheticEnv, t: int, rng: np.random.Generator) -> EnvStep:
    """Draw contexts and rewards for round t from the trial's env stream.

    Draw order (contexts first, then one noise value per arm) is part of
    the determinism contract.
    """
    raw = rng.normal(size=(env.n_arms, env.context_dim // 2))
    contexts = preprocess_many(raw)
    means = env.mean_reward(contexts)
    noise = rng.normal(0.0, env.noise_sigma, size=env.n_arms) if env.noise_sigma > 0 \
        else np.zeros(env.n_arms)
    return EnvStep(contexts, means, means + noise, float(means.max()))
