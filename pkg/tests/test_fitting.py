"""Ascent engine tests: objective, guard semantics, kernel/reference agreement."""

import math

import numpy as np
import pytest

from neural_rbmle.envs import preprocess_context, preprocess_many
from neural_rbmle.errors import NumericError, ShapeError
from neural_rbmle.fitting import ArmEnsemble, ascent_objective
from neural_rbmle.net import (
    NetworkConfig,
    NetworkParams,
    forward_many,
    gradient,
    init_params,
    param_distance,
)
from neural_rbmle.surrogate import FAMILY_NAMES, make_family

CONFIG = NetworkConfig(4, 4, 2)


def anchor_for(config=CONFIG, seed=0):
    return init_params(config, np.random.default_rng(seed))


def small_history(n, config=CONFIG, seed=1):
    rng = np.random.default_rng(seed)
    X = preprocess_many(rng.normal(size=(n, config.input_dim // 2)))
    rewards = rng.uniform(0.0, 1.0, size=n)
    return X, rewards


# ------------------------------------------------------------- objective


def test_ascent_objective_gaussian_hand_value():
    fam = make_family("gaussian")
    val = ascent_objective(fam, np.array([1.0, 2.0]), np.array([1.0, 0.0]),
                           mlam=2.0, anchor_dist_sq=3.0,
                           bias_weight=0.5, bias_score=4.0)
    assert val == pytest.approx(-2.5, abs=1e-14)


def test_ascent_objective_bernoulli_hand_value():
    fam = make_family("bernoulli")
    val = ascent_objective(fam, np.array([0.0]), np.array([1.0]), 0.0, 0.0)
    assert val == pytest.approx(-math.log(2.0), abs=1e-14)


def test_ascent_objective_empty_is_penalty_only():
    fam = make_family("mixture")
    val = ascent_objective(fam, np.empty(0), np.empty(0), 3.0, 2.0)
    assert val == pytest.approx(-3.0, abs=1e-15)


# -------------------------------------------------- basic ensemble state


def test_ensemble_rejects_foreign_anchor():
    other = NetworkConfig(6, 4, 2)
    with pytest.raises(ShapeError):
        ArmEnsemble(CONFIG, anchor_for(other), 2)


@pytest.mark.parametrize("depth", [2, 3])
def test_load_params_round_trip_and_reset(depth):
    config = NetworkConfig(4, 4, depth)
    anchor = anchor_for(config)
    ens = ArmEnsemble(config, anchor, 2)
    rng = np.random.default_rng(5)
    custom = NetworkParams(config, rng.normal(size=config.param_count))
    ens.load(1, custom)
    np.testing.assert_array_equal(ens.params(1).flat, custom.flat)
    np.testing.assert_array_equal(ens.params(0).flat, anchor.flat)
    ens.reset()
    np.testing.assert_array_equal(ens.params(1).flat, anchor.flat)


@pytest.mark.parametrize("depth", [2, 3])
def test_scores_match_forward_many(depth):
    config = NetworkConfig(4, 6, depth)
    ens = ArmEnsemble(config, anchor_for(config), 2)
    rng = np.random.default_rng(6)
    ens.load(1, NetworkParams(config, rng.normal(size=config.param_count)))
    X = rng.normal(size=(5, 4))
    for k in range(2):
        np.testing.assert_allclose(ens.scores(k, X), forward_many(ens.params(k), X),
                                   rtol=1e-12, atol=1e-12)


def test_anchor_dist_sq_matches_param_distance():
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 1)
    rng = np.random.default_rng(7)
    moved = NetworkParams(CONFIG, anchor.flat + rng.normal(size=CONFIG.param_count))
    ens.load(0, moved)
    assert ens.anchor_dist_sq(0) == pytest.approx(param_distance(moved, anchor) ** 2,
                                                  rel=1e-12)


def test_ascend_shape_validation():
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 2)
    X, rewards = small_history(3)
    fam = make_family("gaussian")
    with pytest.raises(ShapeError):
        ens.ascend(X, rewards, np.zeros((3, 4)), 0.0, fam, 1e-3, 1e-3, 5)
    with pytest.raises(ShapeError):
        ens.ascend(X, rewards[:2], np.zeros((2, 4)), 0.0, fam, 1e-3, 1e-3, 5)


# ------------------------------------------------------ exact first step


@pytest.mark.parametrize("name,residual", [
    ("gaussian", 0.7),           # r - 0
    ("bernoulli", 0.2),          # r - sigmoid(0)
    ("mixture", 0.9),            # 2r - (0 + sigmoid(0))
])
def test_single_step_from_anchor_is_scaled_gradient(name, residual):
    # paired-block start scores zero on duplicated-half contexts, so the
    # whole first step is residual * score-gradient; penalty pull is zero.
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 1)
    x = preprocess_context(np.array([0.3, -1.1]))
    step = 1e-4
    ens.ascend(x[None, :], np.array([0.7]), np.zeros((1, 4)), 0.0,
               make_family(name), step, 4 * 1e-3, 1)
    expected = anchor.flat + step * residual * gradient(anchor, x)
    np.testing.assert_allclose(ens.params(0).flat, expected, rtol=0, atol=1e-13)


def test_no_data_no_bias_leaves_anchor_exactly():
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 2)
    ens.ascend(np.empty((0, 4)), np.empty(0), np.zeros((2, 4)), 0.0,
               make_family("gaussian"), 1e-2, 4e-3, 20)
    for k in range(2):
        np.testing.assert_array_equal(ens.params(k).flat, anchor.flat)


# ------------------------------------------------------- guard semantics


def test_overshoot_reverts_to_anchor():
    # one sample, huge step: the first move tanks the objective and is undone
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 1)
    x = preprocess_context(np.array([1.0, 0.5]))
    traces = ens.ascend(x[None, :], np.array([1.0]), np.zeros((1, 4)), 0.0,
                        make_family("gaussian"), 1e6, 4e-3, 50,
                        record_objective=True)
    assert len(traces[0]) == 1
    assert traces[0][0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_array_equal(ens.params(0).flat, anchor.flat)


def test_tiny_step_runs_to_the_cap():
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 1)
    x = preprocess_context(np.array([1.0, 0.5]))
    traces = ens.ascend(x[None, :], np.array([1.0]), np.zeros((1, 4)), 0.0,
                        make_family("gaussian"), 1e-8, 4e-3, 5,
                        record_objective=True)
    assert len(traces[0]) == 6
    diffs = np.diff(traces[0])
    assert np.all(diffs >= 0.0)


def test_recorded_traces_are_monotone_and_capped():
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 3)
    X, rewards = small_history(6)
    bias = preprocess_many(np.random.default_rng(8).normal(size=(3, 2)))
    for name in FAMILY_NAMES:
        ens.reset()
        traces = ens.ascend(X, rewards, bias, 0.4, make_family(name),
                            5e-3, 4e-3, 30, record_objective=True)
        for trace in traces:
            assert 1 <= len(trace) <= 31
            assert np.all(np.diff(trace) >= 0.0)


def test_trace_end_matches_public_objective():
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 2)
    X, rewards = small_history(5)
    bias = preprocess_many(np.random.default_rng(9).normal(size=(2, 2)))
    fam = make_family("bernoulli")
    reg = 4 * 1e-3
    traces = ens.ascend(X, rewards, bias, 0.3, fam, 5e-3, reg, 25,
                        record_objective=True)
    for k in range(2):
        own = float(ens.scores(k, bias[k][None, :])[0])
        recomputed = ascent_objective(fam, ens.scores(k, X), rewards, reg,
                                      ens.anchor_dist_sq(k), 0.3, own)
        assert traces[k][-1] == pytest.approx(recomputed, rel=1e-9, abs=1e-9)
        assert traces[k][-1] >= traces[k][0]


# --------------------------------------------- kernel vs reference engine


@pytest.mark.parametrize("name", FAMILY_NAMES)
@pytest.mark.parametrize("n_hist", [0, 7])
@pytest.mark.parametrize("n_arms", [1, 3])
def test_compiled_kernel_matches_reference(name, n_hist, n_arms):
    anchor = anchor_for()
    fast = ArmEnsemble(CONFIG, anchor, n_arms)
    slow = ArmEnsemble(CONFIG, anchor, n_arms)
    X, rewards = small_history(n_hist, seed=10 + n_hist)
    bias = preprocess_many(np.random.default_rng(11).normal(size=(n_arms, 2)))
    fam = make_family(name)
    args = (X, rewards, bias, 0.8, fam, 2e-3, 4e-3, 40)
    out = fast.ascend(*args)                       # numba path
    assert out is None
    slow.ascend(*args, record_objective=True)      # forces the numpy path
    for k in range(n_arms):
        np.testing.assert_allclose(fast.params(k).flat, slow.params(k).flat,
                                   rtol=0, atol=1e-10)


def test_deep_path_returns_none_and_improves():
    config = NetworkConfig(4, 4, 3)
    anchor = anchor_for(config)
    ens = ArmEnsemble(config, anchor, 2)
    X, rewards = small_history(4, config=config, seed=12)
    bias = preprocess_many(np.random.default_rng(13).normal(size=(2, 2)))
    fam = make_family("gaussian")
    reg = 4e-3
    before = ascent_objective(fam, ens.scores(0, X), rewards, reg, 0.0)
    out = ens.ascend(X, rewards, bias, 0.0, fam, 5e-3, reg, 30)
    assert out is None
    after = ascent_objective(fam, ens.scores(0, X), rewards, reg,
                             ens.anchor_dist_sq(0))
    assert after >= before


# ------------------------------------------------- scaling and stability


def test_tiled_history_with_scaled_penalty_is_invariant():
    # duplicating every sample k times while scaling the penalty and the
    # bias weight by k multiplies the whole objective by k, and the
    # per-sample step normalization keeps every iterate identical
    anchor = anchor_for()
    reps = 3
    X, rewards = small_history(5, seed=14)
    bias = preprocess_many(np.random.default_rng(15).normal(size=(1, 2)))
    base = ArmEnsemble(CONFIG, anchor, 1)
    tiled = ArmEnsemble(CONFIG, anchor, 1)
    base.ascend(X, rewards, bias, 0.5, make_family("gaussian"), 1e-2, 4e-3, 25)
    tiled.ascend(np.tile(X, (reps, 1)), np.tile(rewards, reps), bias,
                 reps * 0.5, make_family("gaussian"), 1e-2, reps * 4e-3, 25)
    np.testing.assert_allclose(tiled.params(0).flat, base.params(0).flat,
                               rtol=0, atol=1e-10)


@pytest.mark.parametrize("record", [False, True])
def test_nan_reward_raises_at_step_zero(record):
    anchor = anchor_for()
    ens = ArmEnsemble(CONFIG, anchor, 1)
    x = preprocess_context(np.array([1.0, 0.0]))
    with pytest.raises(NumericError) as err:
        ens.ascend(x[None, :], np.array([np.nan]), np.zeros((1, 4)), 0.0,
                   make_family("gaussian"), 1e-3, 4e-3, 10,
                   record_objective=record)
    assert err.value.step_index == 0


def test_overflow_mid_ascent_reports_the_step():
    # an absurd step size sends the score to overflow after one accepted
    # step, so the failure surfaces at index 1 on both engines
    anchor = anchor_for()
    for record in (False, True):
        ens = ArmEnsemble(CONFIG, anchor, 1)
        x = preprocess_context(np.array([1.0, 0.5]))
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericError) as err:
                ens.ascend(x[None, :], np.array([1.0]), np.zeros((1, 4)), 0.0,
                           make_family("gaussian"), 1e160, 4e-3, 10,
                           record_objective=record)
        assert err.value.step_index == 1
