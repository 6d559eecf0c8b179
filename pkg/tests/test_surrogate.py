"""Reward-family tests: log-partition values, derivatives, clamp behavior."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from neural_rbmle.bandit import EMPTY_HISTORY, History, Round
from neural_rbmle.errors import ConfigurationError
from neural_rbmle.surrogate import CLAMP_BOUND, FAMILY_NAMES, log_likelihood, make_family

ALL = [make_family(name) for name in FAMILY_NAMES]


def test_family_names_and_weights():
    gaussian, bernoulli, mixture = ALL
    assert gaussian.reward_weight == 1.0
    assert bernoulli.reward_weight == 1.0
    assert mixture.reward_weight == 2.0
    assert math.isinf(gaussian.clamp_bound)
    assert bernoulli.clamp_bound == CLAMP_BOUND == 10.0
    assert mixture.clamp_bound == 10.0


def test_unknown_family_rejected():
    with pytest.raises(ConfigurationError):
        make_family("poisson")


def test_gaussian_point_values():
    f = make_family("gaussian")
    assert f.b(2.0) == 2.0
    assert f.b_prime(2.0) == 2.0
    assert f.b_second(2.0) == 1.0
    assert f.curvature_lower == f.curvature_upper == 1.0


def test_bernoulli_point_values():
    f = make_family("bernoulli")
    assert f.b(0.0) == pytest.approx(math.log(2.0))
    assert f.b_prime(0.0) == pytest.approx(0.5)
    assert f.b_second(0.0) == pytest.approx(0.25)
    assert f.curvature_upper == 0.25
    edge = expit(10.0) * (1.0 - expit(10.0))
    assert f.curvature_lower == pytest.approx(edge)
    assert f.curvature_lower > 0.0


def test_mixture_point_values():
    f = make_family("mixture")
    assert f.b(0.0) == pytest.approx(math.log(2.0))
    assert f.b_second(0.0) == pytest.approx(1.25)
    assert f.curvature_upper == 1.25
    assert f.curvature_lower == pytest.approx(1.0 + expit(10.0) * (1.0 - expit(10.0)))


@pytest.mark.parametrize("family", ALL, ids=FAMILY_NAMES)
def test_derivatives_match_finite_differences(family):
    h = 1e-5
    z = np.linspace(-10.0, 10.0, 100)
    fd_prime = (family.b(z + h) - family.b(z - h)) / (2 * h)
    np.testing.assert_allclose(family.b_prime(z), fd_prime, rtol=0, atol=1e-6)
    fd_second = (family.b_prime(z + h) - family.b_prime(z - h)) / (2 * h)
    np.testing.assert_allclose(family.b_second(z), fd_second, rtol=0, atol=1e-6)


@pytest.mark.parametrize("family", ALL, ids=FAMILY_NAMES)
def test_curvature_bounds_on_operating_interval(family):
    bound = 10.0 if math.isinf(family.clamp_bound) else family.clamp_bound
    z = np.linspace(-bound, bound, 1000)
    second = family.b_second(z)
    assert np.all(second >= family.curvature_lower - 1e-12)
    assert np.all(second <= family.curvature_upper + 1e-12)


@given(st.floats(min_value=-50, max_value=50))
def test_log_partition_is_convex(z):
    for family in ALL:
        assert family.b_second(np.float64(z)) >= 0.0


def test_mixture_terms_are_sum_of_parts():
    gaussian, bernoulli, mixture = ALL
    rng = np.random.default_rng(0)
    r = rng.uniform(0, 1, size=50)
    z = rng.uniform(-9.9, 9.9, size=50)
    combined = mixture.log_lik_terms(r, z)
    parts = gaussian.log_lik_terms(r, z) + bernoulli.log_lik_terms(r, z)
    np.testing.assert_allclose(combined, parts, rtol=0, atol=1e-12)


def test_gaussian_terms_equal_negative_half_squared_error():
    # differences between two predictors drop the r-only constant
    f = make_family("gaussian")
    rng = np.random.default_rng(1)
    r = rng.uniform(0, 1, size=20)
    z1 = rng.normal(size=20)
    z2 = rng.normal(size=20)
    lhs = np.sum(f.log_lik_terms(r, z1)) - np.sum(f.log_lik_terms(r, z2))
    rhs = -0.5 * np.sum((z1 - r) ** 2) + 0.5 * np.sum((z2 - r) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_clamp_saturates_terms():
    f = make_family("bernoulli")
    assert f.log_lik_terms(1.0, 50.0) == f.log_lik_terms(1.0, 10.0)
    assert f.log_lik_terms(0.0, -50.0) == f.log_lik_terms(0.0, -10.0)


def test_score_residuals():
    gaussian, bernoulli, _ = ALL
    r = np.array([1.0, 0.0])
    z = np.array([0.25, -0.5])
    np.testing.assert_allclose(gaussian.score_residuals(r, z), r - z)
    np.testing.assert_allclose(bernoulli.score_residuals(r, z), r - expit(z))


def test_score_residuals_vanish_at_and_beyond_clamp():
    # zero outside the open interval keeps the ascent from pushing further out
    for family in ALL[1:]:
        r = np.ones(3)
        z = np.array([10.0, 12.0, -10.0])
        np.testing.assert_array_equal(family.score_residuals(r, z), np.zeros(3))


def test_mixture_residual_weighting():
    f = make_family("mixture")
    r, z = 0.7, 0.3
    expected = 2 * r - (z + expit(z))
    assert f.score_residuals(np.float64(r), np.float64(z)) == pytest.approx(expected)


# ------------------------------------------------------- log_likelihood


def _one_round_history(context, reward):
    return History((Round(np.asarray(context)[None, :], 0, reward, 1.0),))


def test_log_likelihood_empty_history():
    for family in ALL:
        assert log_likelihood(family, EMPTY_HISTORY, lambda x: 1.0, 0.0, 0.0) == 0.0
    assert log_likelihood(ALL[0], EMPTY_HISTORY, lambda x: 1.0, 2.0, 3.0) == -0.5 * 2.0 * 9.0


def test_log_likelihood_single_gaussian_round():
    history = _one_round_history([1.0, 0.0], 1.0)
    value = log_likelihood(make_family("gaussian"), history, lambda x: 1.0, 0.0, 0.0)
    assert value == pytest.approx(0.5)


def test_log_likelihood_zero_predictor_gaussian():
    history = History(tuple(
        Round(np.eye(2)[i % 2][None, :], 0, 0.3 * i, 1.0) for i in range(4)
    ))
    value = log_likelihood(make_family("gaussian"), history, lambda x: 0.0, 5.0, 0.0)
    assert value == 0.0


def test_log_likelihood_uses_played_context():
    contexts = np.array([[1.0, 0.0], [0.0, 1.0]])
    history = History((Round(contexts, 1, 1.0, 1.0),))
    value = log_likelihood(
        make_family("gaussian"), history, lambda x: float(x[1]), 0.0, 0.0
    )
    # played context is arm 1, so z = 1 and the term is 1 - 1/2
    assert value == pytest.approx(0.5)


def test_log_likelihood_clamps_predictor():
    history = _one_round_history([1.0, 0.0], 1.0)
    f = make_family("bernoulli")
    wild = log_likelihood(f, history, lambda x: 1e6, 0.0, 0.0)
    edge = log_likelihood(f, history, lambda x: 10.0, 0.0, 0.0)
    assert wild == edge
