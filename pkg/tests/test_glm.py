import numpy as np
import pytest

from sdmbench.core import DataError
from sdmbench.glm import (
    INTERCEPT_FLOOR,
    PoissonGLM,
    calibrate_cloglog,
    fit_poisson_l1,
    poisson_nll,
    poisson_nll_grad,
)


def test_all_zero_response_hits_intercept_floor():
    X = np.random.default_rng(0).standard_normal((20, 3))
    model = fit_poisson_l1(X, np.zeros(20), lam=0.1)
    assert model.all_absent
    assert model.intercept == INTERCEPT_FLOOR
    assert np.all(model.beta == 0.0)


def test_huge_lambda_gives_closed_form():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 4))
    y = (rng.random(50) < 0.3).astype(float)
    model = fit_poisson_l1(X, y, lam=1e9)
    assert np.all(model.beta == 0.0)
    assert model.intercept == pytest.approx(np.log(y.mean()), abs=1e-9)
    assert model.converged


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, d = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        X = rng.standard_normal((n, d))
        y = (rng.random(n) < 0.4).astype(float)
        intercept = float(rng.normal())
        beta = rng.normal(scale=0.5, size=d)
        value, g0, g = poisson_nll_grad(X, y, intercept, beta)
        eps = 1e-6
        fd0 = (poisson_nll(X, y, intercept + eps, beta) - poisson_nll(X, y, intercept - eps, beta)) / (2 * eps)
        assert abs(g0 - fd0) / max(1.0, abs(fd0)) < 1e-5
        for j in range(d):
            e = np.zeros(d)
            e[j] = eps
            fd = (poisson_nll(X, y, intercept, beta + e) - poisson_nll(X, y, intercept, beta - e)) / (2 * eps)
            assert abs(g[j] - fd) / max(1.0, abs(fd)) < 1e-5
        assert value == pytest.approx(poisson_nll(X, y, intercept, beta))


def test_objective_non_increasing_per_sweep():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((100, 8))
    logits = 0.8 * X[:, 0] - 0.5 * X[:, 2] - 1.0
    y = (rng.random(100) < 1 / (1 + np.exp(-logits))).astype(float)
    model = fit_poisson_l1(X, y, lam=0.1)
    trace = np.array(model.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * np.maximum(1.0, np.abs(trace[:-1])))


def test_l1_path_nonzeros_non_increasing():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((150, 10))
    eta = 0.6 * X[:, 0] - 0.7 * X[:, 1] + 0.3 * X[:, 4] - 1.2
    y = (rng.random(150) < np.minimum(1.0, np.exp(eta))).astype(float)
    nnz = []
    for lam in (0.01, 0.1, 1.0, 10.0, 100.0):
        model = fit_poisson_l1(X, y, lam=lam)
        nnz.append(int(np.sum(model.beta != 0.0)))
    assert all(a >= b for a, b in zip(nnz, nnz[1:]))
    assert nnz[-1] == 0  # strong enough penalty empties the model


def test_non_finite_features_rejected():
    X = np.array([[1.0], [np.nan]])
    with pytest.raises(DataError):
        fit_poisson_l1(X, np.array([0.0, 1.0]), lam=0.1)


def test_cloglog_constant_intensity_closed_form():
    # lambda == 1 everywhere, prevalence 1/2 -> c = ln 2
    X = np.zeros((10, 1))
    model = PoissonGLM(intercept=0.0, beta=np.zeros(1), l1_lambda=0.0)
    y = np.array([1, 0] * 5, dtype=float)
    c = calibrate_cloglog(model, X, y)
    assert c == pytest.approx(np.log(2.0), rel=1e-8)


def test_cloglog_small_prevalence_small_c():
    X = np.zeros((1000, 1))
    model = PoissonGLM(intercept=0.0, beta=np.zeros(1), l1_lambda=0.0)
    y = np.zeros(1000)
    y[0] = 1.0
    c = calibrate_cloglog(model, X, y)
    assert 0 < c < 0.01


def test_cloglog_residual_small(rng):
    for _ in range(20):
        n, d = 80, 3
        X = rng.standard_normal((n, d))
        beta = rng.normal(scale=0.4, size=d)
        model = PoissonGLM(intercept=float(rng.normal() - 1), beta=beta, l1_lambda=0.0)
        y = (rng.random(n) < 0.3).astype(float)
        if y.sum() == 0:
            y[0] = 1.0
        c = calibrate_cloglog(model, X, y)
        resid = abs(np.sum(1.0 - np.exp(-c * model.intensity(X))) - y.sum())
        assert resid < 1e-6


def test_cloglog_requires_presences():
    model = PoissonGLM(intercept=0.0, beta=np.zeros(1), l1_lambda=0.0)
    with pytest.raises(DataError, match="no presences"):
        calibrate_cloglog(model, np.zeros((5, 1)), np.zeros(5))


def test_model_serialization_roundtrip(rng):
    X = rng.standard_normal((40, 3))
    y = (rng.random(40) < 0.4).astype(float)
    model = fit_poisson_l1(X, y, lam=0.2)
    model.cloglog_c = calibrate_cloglog(model, X, y)
    back = PoissonGLM.from_dict(model.to_dict())
    assert np.array_equal(back.beta, model.beta)
    assert back.intercept == model.intercept
    assert np.array_equal(back.probability(X), model.probability(X))
