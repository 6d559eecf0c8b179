"""Surrogate reward likelihoods built on convex log-partition functions.

Each family scores a predicted value z against an observed reward r through
``reward_weight * r * z - b(z)``, summed over the history, optionally minus a
quadratic penalty anchoring the parameters to their starting point.  Families
whose log-partition has vanishing curvature in the tails (anything with a
logistic term) clamp z to a finite interval so the curvature stays bounded
away from zero on the whole operating range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError

if TYPE_CHECKING:  # pragma: no cover
    from .bandit import History

__all__ = ["SurrogateFamily", "make_family", "log_likelihood", "FAMILY_NAMES"]

FAMILY_NAMES = ("gaussian", "bernoulli", "mixture")

# Clamp half-width for families with a logistic term.  At |z| = 10 the
# logistic curvature is ~4.5e-5, still a usable positive lower bound, while
# predictions for [0, 1]-scale rewards never get near the boundary.
CLAMP_BOUND = 10.0


@dataclass(frozen=True)
class SurrogateFamily:
    """One reward model: log-partition, its derivatives, curvature bounds.

    ``reward_weight`` is the multiplier on the r*z term; it is 2 for the
    mixture family because that family is literally the sum of the Gaussian
    and Bernoulli per-sample scores, each contributing its own r*z.
    ``clamp_bound`` is +inf for families that need no clamping.
    """

    name: str
    b: Callable[[np.ndarray], np.ndarray]
    b_prime: Callable[[np.ndarray], np.ndarray]
    b_second: Callable[[np.ndarray], np.ndarray]
    curvature_lower: float
    curvature_upper: float
    clamp_bound: float
    reward_weight: float = 1.0

    def clamp(self, z: np.ndarray) -> np.ndarray:
        if math.isinf(self.clamp_bound):
            return np.asarray(z, dtype=np.float64)
        return np.clip(z, -self.clamp_bound, self.clamp_bound)

    def log_lik_terms(self, rewards: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Per-sample scores reward_weight * r * clamp(z) - b(clamp(z))."""
        zc = self.clamp(z)
        return self.reward_weight * np.asarray(rewards) * zc - self.b(zc)

    def score_residuals(self, rewards: np.ndarray, z: np.ndarray) -> np.ndarray:
        """d/dz of the per-sample scores, zero outside the clamp interval."""
        zc = self.clamp(z)
        res = self.reward_weight * np.asarray(rewards) - self.b_prime(zc)
        if math.isinf(self.clamp_bound):
            return res
        inside = np.abs(z) < self.clamp_bound
        return np.where(inside, res, 0.0)


def _bernoulli_b(z):
    return np.logaddexp(0.0, z)


def _bernoulli_b_second(z):
    s = expit(z)
    return s * (1.0 - s)


def make_family(name: str) -> SurrogateFamily:
    """Build one of the supported reward models by name."""
    if name == "gaussian":
        return SurrogateFamily(
            name="gaussian",
            b=lambda z: 0.5 * np.square(z),
            b_prime=lambda z: np.asarray(z, dtype=np.float64),
            b_second=lambda z: np.ones_like(np.asarray(z, dtype=np.float64)),
            curvature_lower=1.0,
            curvature_upper=1.0,
            clamp_bound=math.inf,
            reward_weight=1.0,
        )
    if name == "bernoulli":
        edge = float(_bernoulli_b_second(np.float64(CLAMP_BOUND)))
        return SurrogateFamily(
            name="bernoulli",
            b=_bernoulli_b,
            b_prime=lambda z: expit(np.asarray(z, dtype=np.float64)),
            b_second=_bernoulli_b_second,
            curvature_lower=edge,
            curvature_upper=0.25,
            clamp_bound=CLAMP_BOUND,
            reward_weight=1.0,
        )
    if name == "mixture":
        edge = float(_bernoulli_b_second(np.float64(CLAMP_BOUND)))
        return SurrogateFamily(
            name="mixture",
            b=lambda z: 0.5 * np.square(z) + _bernoulli_b(z),
            b_prime=lambda z: np.asarray(z, dtype=np.float64) + expit(z),
            b_second=lambda z: 1.0 + _bernoulli_b_second(z),
            curvature_lower=1.0 + edge,
            curvature_upper=1.25,
            clamp_bound=CLAMP_BOUND,
            reward_weight=2.0,
        )
    raise ConfigurationError(f"unknown likelihood family {name!r}; valid: {FAMILY_NAMES}")


def log_likelihood(
    family: SurrogateFamily,
    history: "History",
    predictor: Callable[[np.ndarray], float],
    reg: float,
    anchor_distance: float,
) -> float:
    """Penalized surrogate log-likelihood of a history of played rounds.

    Sums the per-sample scores of ``predictor`` evaluated at each played
    context, minus ``reg / 2`` times the squared anchor distance.  An empty
    history contributes only the penalty.
    """
    total = 0.0
    for round_ in history.rounds:
        z = float(predictor(round_.contexts[round_.chosen_arm]))
        total += float(family.log_lik_terms(np.float64(round_.reward), np.float64(z)))
    return total - 0.5 * reg * anchor_distance**2
