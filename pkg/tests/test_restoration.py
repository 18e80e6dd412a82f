import numpy as np
import pytest

from adasense.engine import AcquisitionState, append_measurement
from adasense.fixtures import gaussian_diag3, gaussian_rotated
from adasense.priors import condition, sample_prior
from adasense.restoration import (
    PosteriorMeanReconstructor,
    RestorationSpec,
    mse,
    psnr,
    restore,
    restore_linear,
    restore_mean,
    restore_sample,
)
from adasense.samplers import SamplerSpec

EXACT = SamplerSpec()


def test_linear_examples():
    h = np.eye(3)[:2]
    np.testing.assert_allclose(restore_linear(h, np.zeros(3), y=[2.0, 5.0]), [2.0, 5.0, 0.0])
    mu = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(restore_linear(np.zeros((0, 3)), mu, y=[]), mu)


def test_linear_matches_least_squares():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    h = q.T
    x, mu = rng.standard_normal(6), rng.standard_normal(6)
    est = restore_linear(h, mu, y=h @ x)
    # projection of x onto span(H) by normal equations, plus mu off the span
    coef = np.linalg.solve(h @ h.T, h @ x)
    mu_coef = np.linalg.solve(h @ h.T, h @ mu)
    expected = h.T @ coef + (mu - h.T @ mu_coef)
    np.testing.assert_allclose(est, expected, atol=1e-9)


def test_linear_from_state_uses_cached_pinv():
    state = AcquisitionState.start(3, 1, 2, 1)
    x = np.array([1.0, 2.0, 3.0])
    append_measurement(state, [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]], x)
    est = restore_linear(state, np.zeros(3))
    np.testing.assert_allclose(state.sensing.rows @ est, state.measurements, atol=1e-12)


def test_sample_fully_determined():
    prior = gaussian_rotated(dim=4)
    x = sample_prior(prior, 1, np.random.default_rng(0))[0]
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))
    est = restore_sample(q.T, prior, EXACT, np.random.default_rng(2), y=q.T @ x)
    np.testing.assert_allclose(est, x, atol=1e-9)


def test_sample_without_measurements_is_a_prior_draw():
    prior = gaussian_diag3()
    draws = np.array([restore_sample(np.zeros((0, 3)), prior, EXACT, np.random.default_rng(i), y=[]) for i in range(4000)])
    np.testing.assert_allclose(draws.var(axis=0), [4.0, 1.0, 0.25], rtol=0.1)


def test_mean_with_one_draw_equals_sample():
    prior = gaussian_diag3()
    h, y = np.eye(3)[:1], np.array([1.0])
    a = restore_mean(h, prior, EXACT, 1, np.random.default_rng(3), y=y)
    b = restore_sample(h, prior, EXACT, np.random.default_rng(3), y=y)
    np.testing.assert_array_equal(a, b)


def test_mean_converges_to_posterior_mean():
    prior = gaussian_rotated(dim=6)
    h = np.eye(6)[:2]
    y = h @ sample_prior(prior, 1, np.random.default_rng(0))[0]
    exact = PosteriorMeanReconstructor(prior)(h, y)
    post_var = np.trace(condition(prior, h, y).cov)
    for s in (16, 256, 4096):
        errs = [np.sum((restore_mean(h, prior, EXACT, s, np.random.default_rng([s, i]), y=y) - exact) ** 2)
                for i in range(20)]
        # E|mean_s - mean|^2 = tr(Cov) / s
        assert np.mean(errs) == pytest.approx(post_var / s, rel=0.5)


def test_restore_dispatch():
    prior = gaussian_diag3()
    state = AcquisitionState.start(3, 1, 1, 1)
    append_measurement(state, np.eye(3)[:1], np.array([1.0, 0.0, 0.0]))
    lin = restore(state, prior, RestorationSpec(mode="linear"), np.random.default_rng(0))
    np.testing.assert_allclose(lin, [1.0, 0.0, 0.0])
    mean = restore(state, prior, RestorationSpec(mode="mean", mean_count=8), np.random.default_rng(0))
    assert mean[0] == pytest.approx(1.0)


def test_metrics():
    x = np.array([0.1, 0.2, 0.3])
    assert mse(x, x) == 0.0
    assert psnr(x, x, 1.0) == float("inf")
    assert psnr(np.zeros(4), np.full(4, 0.1), 1.0) == pytest.approx(20.0)
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(50), rng.standard_normal(50)
    d = [(p - q) for p, q in zip(a, b)]
    two_pass = sum(v * v for v in d) / len(d)
    assert mse(a, b) == pytest.approx(two_pass, rel=1e-12)
