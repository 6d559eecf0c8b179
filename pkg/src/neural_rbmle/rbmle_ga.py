"""Reward-biased index policy with per-arm gradient-ascent estimators.

Every round, one weight copy per arm is advanced by J full-batch ascent
steps on the penalized likelihood of the history plus a reward-bias term
that pays for scoring that arm's current context highly.  The played arm is
the one whose fitted copy attains the largest biased likelihood, with the
bias amplified by a slowly growing gain at comparison time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bandit import History
from .errors import ConfigurationError, ShapeError
from .fitting import ArmEnsemble, ascent_objective
from .net import NetworkConfig, NetworkParams, forward
from .surrogate import SurrogateFamily, log_likelihood

__all__ = [
    "GaConfig",
    "ZETA_NAMES",
    "zeta_value",
    "ga_objective",
    "fit_arm_estimator",
    "ga_index",
    "select_arm_ga",
    "NeuralRbmleGa",
]

ZETA_NAMES = ("one_plus_log", "sqrt", "constant_one")


@dataclass(frozen=True)
class GaConfig:
    """Knobs of the gradient-ascent policy.

    ``alpha_scale`` scales the reward bias, which grows as the square root
    of the round index.  ``zeta`` names the extra gain applied to the bias
    at comparison (not fitting) time.  ``warm_start`` keeps each arm's
    weights across rounds instead of restarting from the anchor.
    """

    alpha_scale: float = 0.1
    steps: int = 100
    step_size: float = 1e-3
    ridge: float = 1e-3
    zeta: str = "one_plus_log"
    warm_start: bool = True

    def __post_init__(self):
        if self.alpha_scale < 0:
            raise ConfigurationError(f"alpha_scale must be >= 0, got {self.alpha_scale}")
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        if self.step_size <= 0:
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if self.ridge <= 0:
            raise ConfigurationError(f"ridge must be positive, got {self.ridge}")
        if self.zeta not in ZETA_NAMES:
            raise ConfigurationError(f"zeta must be one of {ZETA_NAMES}, got {self.zeta!r}")

    def bias_weight(self, t: int) -> float:
        return self.alpha_scale * math.sqrt(t)


def zeta_value(name: str, t: int) -> float:
    """Comparison-time gain on the reward bias at round t (1-based)."""
    if name == "one_plus_log":
        return 1.0 + math.log(t)
    if name == "sqrt":
        return math.sqrt(t)
    if name == "constant_one":
        return 1.0
    raise ConfigurationError(f"zeta must be one of {ZETA_NAMES}, got {name!r}")


def ga_objective(
    family: SurrogateFamily,
    history: History,
    params: NetworkParams,
    anchor: NetworkParams,
    arm_context: np.ndarray,
    alpha_t: float,
    ridge: float,
) -> float:
    """Fitting objective: penalized likelihood plus alpha_t times the arm score."""
    reg = params.config.hidden_width * ridge
    dist = float(np.linalg.norm(params.flat - anchor.flat))
    ll = log_likelihood(family, history, lambda x: forward(params, x), reg, dist)
    return ll + alpha_t * forward(params, arm_context)


def ga_index(
    family: SurrogateFamily,
    history: History,
    params: NetworkParams,
    anchor: NetworkParams,
    arm_context: np.ndarray,
    alpha_t: float,
    zeta_t: float,
    ridge: float,
) -> float:
    """Comparison value: penalized likelihood plus alpha_t * zeta_t * arm score."""
    reg = params.config.hidden_width * ridge
    dist = float(np.linalg.norm(params.flat - anchor.flat))
    ll = log_likelihood(family, history, lambda x: forward(params, x), reg, dist)
    return ll + alpha_t * zeta_t * forward(params, arm_context)


def fit_arm_estimator(
    family: SurrogateFamily,
    history: History,
    config: GaConfig,
    net_config: NetworkConfig,
    anchor: NetworkParams,
    arm_context: np.ndarray,
    t: int,
    init: NetworkParams,
    record_objective: bool = False,
):
    """Exactly ``config.steps`` ascent steps from ``init``; returns the result.

    With ``record_objective`` the per-step objective values (length steps+1,
    including the value before the first and after the last step) are
    returned alongside the fitted weights.
    """
    if t < 1:
        raise ConfigurationError(f"round index must be >= 1, got {t}")
    ens = ArmEnsemble(net_config, anchor, 1)
    ens.load(0, init)
    n = len(history)
    X = history.played_contexts() if n else np.empty((0, net_config.input_dim))
    traces = ens.ascend(
        X,
        history.rewards(),
        np.asarray(arm_context, dtype=np.float64)[None, :],
        config.bias_weight(t),
        family,
        config.step_size,
        net_config.hidden_width * config.ridge,
        config.steps,
        record_objective=record_objective,
    )
    fitted = ens.params(0)
    if record_objective:
        return fitted, traces[0]
    return fitted


class NeuralRbmleGa:
    """Bandit agent wrapping the per-arm ascent machinery.

    The ensemble of per-arm weight copies is created on the first call to
    ``select_arm`` (arm count fixed from then on).  ``arm_estimator(k)``
    exposes arm k's weights as fitted in the most recent selection;
    ``last_indices`` holds the comparison values of that round.
    """

    def __init__(self, net_config: NetworkConfig, config: GaConfig,
                 family: SurrogateFamily, anchor: NetworkParams):
        if anchor.config != net_config:
            raise ShapeError("anchor was built for a different network config")
        self.net_config = net_config
        self.config = config
        self.family = family
        self.anchor = anchor
        self._ens: ArmEnsemble | None = None
        self._played: list[np.ndarray] = []
        self._rewards: list[float] = []
        self.last_indices: np.ndarray | None = None

    def _history_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._played:
            return np.stack(self._played), np.array(self._rewards)
        return np.empty((0, self.net_config.input_dim)), np.empty(0)

    def select_arm(self, contexts: np.ndarray, t: int) -> int:
        contexts = np.asarray(contexts, dtype=np.float64)
        n_arms = contexts.shape[0]
        if self._ens is None:
            self._ens = ArmEnsemble(self.net_config, self.anchor, n_arms)
        elif self._ens.n_arms != n_arms:
            raise ShapeError(f"arm count changed from {self._ens.n_arms} to {n_arms}")
        if not self.config.warm_start:
            self._ens.reset()

        X, rewards = self._history_arrays()
        alpha = self.config.bias_weight(t)
        reg = self.net_config.hidden_width * self.config.ridge
        self._ens.ascend(X, rewards, contexts, alpha, self.family,
                         self.config.step_size, reg, self.config.steps)

        gain = zeta_value(self.config.zeta, t)
        indices = np.empty(n_arms)
        for k in range(n_arms):
            hist_scores = self._ens.scores(k, X)
            own_score = float(self._ens.scores(k, contexts[k][None, :])[0])
            indices[k] = ascent_objective(
                self.family, hist_scores, rewards, reg, self._ens.anchor_dist_sq(k)
            ) + alpha * gain * own_score
        self.last_indices = indices
        return int(np.argmax(indices))

    def arm_estimator(self, k: int) -> NetworkParams:
        if self._ens is None:
            raise ConfigurationError("no selection has happened yet")
        return self._ens.params(k)

    def observe(self, contexts: np.ndarray, arm: int, reward: float, t: int) -> None:
        contexts = np.asarray(contexts, dtype=np.float64)
        self._played.append(contexts[arm].copy())
        self._rewards.append(float(reward))


def select_arm_ga(agent: NeuralRbmleGa, contexts: np.ndarray, t: int) -> int:
    """Functional alias for ``agent.select_arm``."""
    return agent.select_arm(contexts, t)
