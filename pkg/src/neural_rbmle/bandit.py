"""Shared bandit data model: rounds, histories, regret bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import ContractError

__all__ = [
    "Round",
    "History",
    "EMPTY_HISTORY",
    "record_round",
    "RegretTrace",
    "cumulative_regret",
    "Agent",
]


def _read_only(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.flags.writeable:
        a = a.copy()
        a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Round:
    """One interaction: the K offered contexts, the choice, the outcome.

    ``optimal_mean`` is the environment's best achievable mean reward this
    round; regret is measured against it, not against realized rewards.
    """

    contexts: np.ndarray  # (K, d)
    chosen_arm: int
    reward: float
    optimal_mean: float

    def __post_init__(self):
        object.__setattr__(self, "contexts", _read_only(self.contexts))
        K = self.contexts.shape[0]
        if not 0 <= self.chosen_arm < K:
            raise ContractError(f"chosen_arm {self.chosen_arm} outside [0, {K})")
        if not -1e-9 <= self.optimal_mean <= 1.0 + 1e-9:
            raise ContractError(f"optimal_mean {self.optimal_mean} outside [0, 1]")

    @property
    def played_context(self) -> np.ndarray:
        return self.contexts[self.chosen_arm]


@dataclass(frozen=True)
class History:
    """Append-only record of played rounds, value semantics throughout.

    ``cached_grads`` optionally stores one flat gradient per played round
    (agents that maintain a precision matrix need the gradient that was
    current at selection time, which cannot be recomputed later).
    """

    rounds: tuple[Round, ...] = ()
    cached_grads: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.cached_grads is not None and len(self.cached_grads) != len(self.rounds):
            raise ContractError(
                f"cached_grads length {len(self.cached_grads)} != rounds {len(self.rounds)}"
            )

    def __len__(self) -> int:
        return len(self.rounds)

    def played_contexts(self) -> np.ndarray:
        if not self.rounds:
            return np.empty((0, 0))
        return np.stack([r.played_context for r in self.rounds])

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.rounds])


EMPTY_HISTORY = History()


def record_round(history: History, round_: Round, grad: np.ndarray | None = None) -> History:
    """Return a new history with ``round_`` appended; the input is unchanged."""
    caching = history.cached_grads is not None or (len(history) == 0 and grad is not None)
    if caching:
        if grad is None:
            raise ContractError("history caches gradients but no gradient was supplied")
        prev = history.cached_grads or ()
        grads = prev + (_read_only(grad),)
    else:
        if grad is not None:
            raise ContractError("gradient supplied but this history does not cache gradients")
        grads = None
    return History(history.rounds + (round_,), grads)


class RegretTrace:
    """Per-step regret log for one trial; single-writer, append-only."""

    def __init__(self):
        self.steps: list[int] = []
        self.arms: list[int] = []
        self.rewards: list[float] = []
        self.optimal_means: list[float] = []
        self.instant_regrets: list[float] = []
        self.cumulative_regrets: list[float] = []

    def append(
        self,
        t: int,
        arm: int,
        reward: float,
        optimal_mean: float,
        instant_regret: float,
    ) -> None:
        prev = self.cumulative_regrets[-1] if self.cumulative_regrets else 0.0
        self.steps.append(t)
        self.arms.append(arm)
        self.rewards.append(reward)
        self.optimal_means.append(optimal_mean)
        self.instant_regrets.append(instant_regret)
        self.cumulative_regrets.append(prev + instant_regret)

    def __len__(self) -> int:
        return len(self.steps)


def cumulative_regret(trace: RegretTrace) -> float:
    """Total regret accumulated over the trace (0 for an empty trace)."""
    return trace.cumulative_regrets[-1] if len(trace) else 0.0


class Agent(Protocol):
    """Interaction contract every policy implements."""

    def select_arm(self, contexts: np.ndarray, t: int) -> int: ...

    def observe(self, contexts: np.ndarray, arm: int, reward: float, t: int) -> None: ...
