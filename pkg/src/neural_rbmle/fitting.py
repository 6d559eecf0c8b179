"""Full-batch gradient ascent on penalized surrogate likelihoods.

Two interchangeable engines drive every fit in the package:

* a numba kernel specialized to the default two-layer scorer, fitting all K
  per-arm weight copies of one round in a single call (the hot path; a
  thousand-round trial runs thousands of capped ascents over the whole
  history, so this loop dominates total runtime);
* a plain numpy reference for any depth that can also record the objective
  value at every accepted step.

Both ascend the same objective: the clamped per-sample likelihood scores,
minus a quadratic penalty anchoring the weights to their starting point,
plus an optional reward-bias term that pays for scoring one designated
context highly.  The step count is a cap, not a quota: the objective is
evaluated before every step and once more after the last, and the first
step that lowers it is undone and ends that arm's ascent.  The summed
likelihood gets stiffer as the history grows, so with a fixed step size
this guard is what keeps long runs finite; accepted steps always use the
full step size.  Agreement of the two engines is pinned by tests; the
dispatch is by depth only, never by timing, so a given configuration always
takes the same code path.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import NumericError, ShapeError
from .net import NetworkConfig, NetworkParams
from .surrogate import SurrogateFamily

__all__ = ["ArmEnsemble", "ascent_objective"]

_FAMILY_CODES = {"gaussian": 0, "bernoulli": 1, "mixture": 2}


@njit(cache=True, fastmath=False)
def _ascend_depth2(W1, WL, W1_anchor, WL_anchor, XT, wr, bias_X, bias_weight,
                   clamp, fam, sqm, eta, mlam, J):
    """Guarded ascent for K stacked two-layer models, in place.

    W1 (K, m, d) and WL (K, m) are mutated; XT is the history contexts
    transposed to (d, t) so inner loops stream contiguously.  wr holds
    rewards already multiplied by the family's reward weight.  Returns -1
    on success, else the first step index with a non-finite objective.
    """
    K, m, d = W1.shape
    t = wr.shape[0]
    X = np.ascontiguousarray(XT.T)
    ones = np.ones(t)
    z = np.empty(t)
    c = np.empty(t)
    M = np.empty((m, t))
    R = np.empty((m, t))
    pre_b = np.empty(m)
    W1_prev = np.empty((m, d))
    WL_prev = np.empty(m)
    for k in range(K):
        W1k = W1[k]
        WLk = WL[k]
        prev_obj = -np.inf
        for step in range(J + 1):
            P = np.dot(W1k, XT)  # (m, t) pre-activations over the history
            for j in range(t):
                z[j] = 0.0
            for i in range(m):
                Pi = P[i]
                wi = WLk[i]
                for j in range(t):
                    v = Pi[j]
                    z[j] += wi * (v if v > 0.0 else 0.0)
            # Per-sample score residuals and the likelihood part of the
            # objective, from the same pass.
            lik = 0.0
            for j in range(t):
                zz = sqm * z[j]
                if fam == 0:
                    c[j] = wr[j] - zz
                    lik += wr[j] * zz - 0.5 * zz * zz
                else:
                    zc = clamp if zz > clamp else (-clamp if zz < -clamp else zz)
                    s = 1.0 / (1.0 + np.exp(-zc))
                    soft = zc + np.log1p(np.exp(-zc)) if zc > 0.0 else np.log1p(np.exp(zc))
                    if fam == 1:
                        bp = s
                        bval = soft
                    else:
                        bp = zc + s
                        bval = 0.5 * zc * zc + soft
                    c[j] = (wr[j] - bp) if (-clamp < zz < clamp) else 0.0
                    lik += wr[j] * zc - bval
            # Reward-bias score of this arm's designated context.
            fb = 0.0
            for i in range(m):
                pre = 0.0
                for l in range(d):
                    pre += W1k[i, l] * bias_X[k, l]
                pre_b[i] = pre
                if pre > 0.0:
                    fb += WLk[i] * pre
            pen = 0.0
            for i in range(m):
                for l in range(d):
                    dv = W1k[i, l] - W1_anchor[i, l]
                    pen += dv * dv
                dv = WLk[i] - WL_anchor[i]
                pen += dv * dv
            obj = lik + bias_weight * sqm * fb - 0.5 * mlam * pen
            if not np.isfinite(obj):
                return step
            if obj < prev_obj:
                # The last step hurt: undo it and stop this arm.
                for i in range(m):
                    for l in range(d):
                        W1k[i, l] = W1_prev[i, l]
                    WLk[i] = WL_prev[i]
                break
            if step == J:
                break
            prev_obj = obj
            for i in range(m):
                for l in range(d):
                    W1_prev[i, l] = W1k[i, l]
                WL_prev[i] = WLk[i]
            # Backward pass: residuals masked by each unit's active set.
            # dWL comes from row sums of M*P, dW1 from one small GEMM.
            for i in range(m):
                Pi = P[i]
                Mi = M[i]
                Ri = R[i]
                for j in range(t):
                    pij = Pi[j]
                    cm = c[j] if pij > 0.0 else 0.0
                    Mi[j] = cm
                    Ri[j] = cm * pij
            dWL = np.dot(R, ones)
            dW1 = np.dot(M, X)  # (m, d)
            for i in range(m):
                pre = pre_b[i]
                if pre > 0.0:
                    dWL[i] += bias_weight * pre
                    for l in range(d):
                        dW1[i, l] += bias_weight * bias_X[k, l]
            for i in range(m):
                wi = WLk[i]
                for l in range(d):
                    W1k[i, l] += eta * (sqm * wi * dW1[i, l]
                                        - mlam * (W1k[i, l] - W1_anchor[i, l]))
                WLk[i] += eta * (sqm * dWL[i] - mlam * (WLk[i] - WL_anchor[i]))
    return -1


def _batched_forward(mats, X, sqm):
    """Returns (pre-activation list, activation list, scores)."""
    pres = []
    acts = [X]
    H = X
    for W in mats[:-1]:
        Z = H @ W.T
        pres.append(Z)
        H = np.maximum(Z, 0.0)
        acts.append(H)
    return pres, acts, sqm * (H @ mats[-1][0])


def _weighted_grads(mats, pres, acts, weights, sqm):
    """Sum over rows of weights[j] * (gradient of score_j), per layer."""
    L = len(mats)
    grads = [None] * L
    grads[L - 1] = (sqm * (weights @ acts[L - 1]))[None, :]
    U = (sqm * weights)[:, None] * mats[L - 1][0][None, :]
    for layer in range(L - 2, -1, -1):
        U = U * (pres[layer] > 0.0)
        grads[layer] = U.T @ acts[layer]
        if layer > 0:
            U = U @ mats[layer]
    return grads


def _ascend_reference(mats, anchors, X, rewards, bias_x, bias_weight, family,
                      sqm, eta, mlam, J, record):
    """Generic-depth twin of the numba kernel, one model per call.

    Semantics match the kernel exactly: evaluate, stop-and-revert on the
    first objective decrease, cap at J steps.  When recording, returns the
    objective at every retained iterate (so the trace is non-decreasing by
    construction and has length <= J + 1).
    """
    n = X.shape[0]
    X_aug = np.vstack([X, bias_x[None, :]])
    trace = [] if record else None
    saved = None
    prev_obj = -math.inf
    for step in range(J + 1):
        pres, acts, scores = _batched_forward(mats, X_aug, sqm)
        ll = float(np.sum(family.log_lik_terms(rewards, scores[:n])))
        dist_sq = sum(float(np.sum((W - A) ** 2)) for W, A in zip(mats, anchors))
        obj = ll - 0.5 * mlam * dist_sq + bias_weight * float(scores[n])
        if not math.isfinite(obj):
            raise NumericError("non-finite objective during ascent", step_index=step)
        if obj < prev_obj:
            for W, S in zip(mats, saved):
                W[:] = S
            break
        if record:
            trace.append(obj)
        if step == J:
            break
        prev_obj = obj
        saved = [W.copy() for W in mats]
        weights = np.append(family.score_residuals(rewards, scores[:n]), bias_weight)
        grads = _weighted_grads(mats, pres, acts, weights, sqm)
        for W, G, A in zip(mats, grads, anchors):
            W += eta * (G - mlam * (W - A))
    return trace


def ascent_objective(family: SurrogateFamily, scores: np.ndarray, rewards: np.ndarray,
                     mlam: float, anchor_dist_sq: float,
                     bias_weight: float = 0.0, bias_score: float = 0.0) -> float:
    """The value the ascent engines maximize, from precomputed scores."""
    ll = float(np.sum(family.log_lik_terms(rewards, scores)))
    return ll - 0.5 * mlam * anchor_dist_sq + bias_weight * bias_score


class ArmEnsemble:
    """K live weight copies of one scorer, fit jointly against a history.

    The default-depth path keeps the copies in contiguous stacks so one
    kernel call advances every arm; deeper scorers fall back to the numpy
    reference per arm.  All copies share a single anchor (the common
    starting weights), and ``reset()`` restores every copy to it.
    """

    def __init__(self, config: NetworkConfig, anchor: NetworkParams, n_arms: int):
        if anchor.config != config:
            raise ShapeError("anchor was built for a different network config")
        self.config = config
        self.n_arms = n_arms
        self._sqm = math.sqrt(config.hidden_width)
        self.anchor_mats = [np.ascontiguousarray(W) for W in anchor.matrices()]
        if config.depth == 2:
            self.W1 = np.ascontiguousarray(
                np.repeat(self.anchor_mats[0][None, :, :], n_arms, axis=0))
            self.WL = np.ascontiguousarray(
                np.repeat(self.anchor_mats[1][0][None, :], n_arms, axis=0))
            self.mats = None
        else:
            self.W1 = self.WL = None
            self.mats = [[W.copy() for W in self.anchor_mats] for _ in range(n_arms)]

    def reset(self) -> None:
        if self.config.depth == 2:
            self.W1[:] = self.anchor_mats[0][None, :, :]
            self.WL[:] = self.anchor_mats[1][0][None, :]
        else:
            for arm_mats in self.mats:
                for W, A in zip(arm_mats, self.anchor_mats):
                    W[:] = A

    def _arm_mats(self, k: int) -> list[np.ndarray]:
        if self.config.depth == 2:
            return [self.W1[k], self.WL[k][None, :]]
        return self.mats[k]

    def params(self, k: int) -> NetworkParams:
        return NetworkParams.from_matrices(self.config, self._arm_mats(k))

    def load(self, k: int, params: NetworkParams) -> None:
        for W, src in zip(self._arm_mats(k), params.matrices()):
            W[:] = src

    def scores(self, k: int, X: np.ndarray) -> np.ndarray:
        """Forward pass of arm k's current weights over rows of X."""
        _, _, s = _batched_forward(self._arm_mats(k), X, self._sqm)
        return s

    def anchor_dist_sq(self, k: int) -> float:
        return sum(float(np.sum((W - A) ** 2))
                   for W, A in zip(self._arm_mats(k), self.anchor_mats))

    def ascend(self, X: np.ndarray, rewards: np.ndarray, bias_contexts: np.ndarray,
               bias_weight: float, family: SurrogateFamily, step_size: float,
               reg: float, steps: int, record_objective: bool = False):
        """Guarded ascent on every arm, in place; at most ``steps`` steps each.

        ``bias_contexts`` has one row per arm; arm k's objective adds
        ``bias_weight * score_k(bias_contexts[k])``.  ``reg`` multiplies the
        squared anchor distance (halved) in the objective.  Returns the list
        of per-arm objective traces when recording, else None.

        ``step_size`` is applied to the objective scaled by 1/max(1, n)
        where n is the history length, i.e. the summed likelihood is read
        per-sample.  The scaling leaves the maximizer and the shape of the
        landscape untouched; it only keeps a fixed step size meaningful as
        the sum grows (the sum's curvature grows with n, so any constant
        step would eventually overshoot).
        """
        X = np.ascontiguousarray(X, dtype=np.float64)
        rewards = np.asarray(rewards, dtype=np.float64)
        bias_contexts = np.ascontiguousarray(bias_contexts, dtype=np.float64)
        if bias_contexts.shape != (self.n_arms, self.config.input_dim):
            raise ShapeError(
                f"bias contexts shape {bias_contexts.shape} != "
                f"({self.n_arms}, {self.config.input_dim})")
        if X.shape[0] != rewards.shape[0]:
            raise ShapeError("history contexts and rewards disagree in length")
        eta = float(step_size) / max(1, X.shape[0])

        if self.config.depth == 2 and not record_objective:
            wr = np.ascontiguousarray(family.reward_weight * rewards)
            XT = np.ascontiguousarray(X.T)
            status = _ascend_depth2(
                self.W1, self.WL, self.anchor_mats[0], self.anchor_mats[1][0],
                XT, wr, bias_contexts, float(bias_weight),
                float(family.clamp_bound), _FAMILY_CODES[family.name],
                self._sqm, eta, float(reg), int(steps))
            if status >= 0:
                raise NumericError("non-finite objective during ascent",
                                   step_index=int(status))
            return None

        traces = []
        for k in range(self.n_arms):
            traces.append(_ascend_reference(
                self._arm_mats(k), self.anchor_mats, X, rewards,
                bias_contexts[k], float(bias_weight), family,
                self._sqm, eta, float(reg), int(steps),
                record_objective))
        return traces if record_objective else None
