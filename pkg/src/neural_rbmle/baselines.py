"""Comparison agents: tangent-bonus UCB, biased linear ridge, uniform random."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, ContractError
from .net import NetworkConfig, NetworkParams, forward, gradient
from .precision import PrecisionMatrix, solve_precision
from .rbmle_pc import TangentPrecisionState

__all__ = [
    "neural_ucb_index",
    "NeuralUcb",
    "LinearModelState",
    "lin_rbmle_index",
    "LinRbmle",
    "random_policy",
    "RandomAgent",
]


def neural_ucb_index(theta_hat: NetworkParams, z: PrecisionMatrix, x: np.ndarray,
                     gamma: float, m: int | None = None) -> float:
    """Greedy score plus an exploration bonus from the tangent direction."""
    if gamma < 0:
        raise ContractError(f"gamma must be >= 0, got {gamma}")
    if m is None:
        m = theta_hat.config.hidden_width
    g = gradient(theta_hat, x)
    bonus = math.sqrt(float(g @ solve_precision(z, g)) / m)
    return forward(theta_hat, x) + gamma * bonus


class NeuralUcb:
    """Upper-confidence agent sharing the base-estimator machinery."""

    def __init__(self, net_config: NetworkConfig, anchor: NetworkParams,
                 gamma: float = 0.1, steps: int = 100, step_size: float = 1e-3,
                 ridge: float = 1e-3, precision_mode: str = "diagonal"):
        if gamma < 0:
            raise ConfigurationError(f"gamma must be >= 0, got {gamma}")
        self.gamma = gamma
        self.state = TangentPrecisionState(
            net_config, anchor, steps, step_size, ridge, precision_mode)
        self._cached_grad: np.ndarray | None = None

    def select_arm(self, contexts: np.ndarray, t: int) -> int:
        contexts = np.asarray(contexts, dtype=np.float64)
        theta = self.state.estimate()
        m = self.state.net_config.hidden_width
        indices = np.empty(contexts.shape[0])
        grads = []
        for k in range(contexts.shape[0]):
            g = gradient(theta, contexts[k])
            grads.append(g)
            bonus = math.sqrt(self.state.quad_form(g) / m)
            indices[k] = forward(theta, contexts[k]) + self.gamma * bonus
        chosen = int(np.argmax(indices))
        self._cached_grad = grads[chosen]
        return chosen

    def observe(self, contexts: np.ndarray, arm: int, reward: float, t: int) -> None:
        if self._cached_grad is None:
            raise ContractError("observe() called before any selection")
        contexts = np.asarray(contexts, dtype=np.float64)
        self.state.record(contexts[arm], reward, self._cached_grad)
        self._cached_grad = None


@dataclass
class LinearModelState:
    """Ridge regression sufficient statistics: V = ridge*I + sum x x^T, b = sum r x."""

    V: np.ndarray
    b: np.ndarray

    @classmethod
    def fresh(cls, dim: int, ridge: float) -> "LinearModelState":
        if ridge <= 0:
            raise ConfigurationError(f"ridge must be positive, got {ridge}")
        return cls(ridge * np.eye(dim), np.zeros(dim))

    def theta(self) -> np.ndarray:
        return np.linalg.solve(self.V, self.b)

    def add(self, x: np.ndarray, reward: float) -> None:
        x = np.asarray(x, dtype=np.float64)
        self.V += np.outer(x, x)
        self.b += reward * x


def lin_rbmle_index(state: LinearModelState, x: np.ndarray, alpha_t: float) -> float:
    """Biased ridge index: prediction plus half the bias times the leverage."""
    x = np.asarray(x, dtype=np.float64)
    factor = cho_factor(state.V, lower=True, check_finite=False)
    theta = cho_solve(factor, state.b, check_finite=False)
    leverage = float(x @ cho_solve(factor, x, check_finite=False))
    return float(x @ theta) + 0.5 * alpha_t * leverage


class LinRbmle:
    """Reward-biased linear ridge agent."""

    def __init__(self, dim: int, ridge: float = 1.0, alpha_scale: float = 0.1):
        self.alpha_scale = alpha_scale
        self.state = LinearModelState.fresh(dim, ridge)

    def select_arm(self, contexts: np.ndarray, t: int) -> int:
        contexts = np.asarray(contexts, dtype=np.float64)
        alpha = self.alpha_scale * math.sqrt(t)
        factor = cho_factor(self.state.V, lower=True, check_finite=False)
        theta = cho_solve(factor, self.state.b, check_finite=False)
        preds = contexts @ theta
        leverage = np.einsum(
            "kd,dk->k", contexts, cho_solve(factor, contexts.T, check_finite=False))
        return int(np.argmax(preds + 0.5 * alpha * leverage))

    def observe(self, contexts: np.ndarray, arm: int, reward: float, t: int) -> None:
        contexts = np.asarray(contexts, dtype=np.float64)
        self.state.add(contexts[arm], reward)


def random_policy(n_arms: int, rng: np.random.Generator) -> int:
    """Uniform arm draw from the trial's agent stream."""
    if n_arms < 1:
        raise ContractError(f"need at least one arm, got {n_arms}")
    return int(rng.integers(n_arms))


class RandomAgent:
    """Ignores contexts entirely."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def select_arm(self, contexts: np.ndarray, t: int) -> int:
        return random_policy(np.asarray(contexts).shape[0], self.rng)

    def observe(self, contexts: np.ndarray, arm: int, reward: float, t: int) -> None:
        pass
