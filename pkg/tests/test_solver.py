import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from conftest import FAMILIES, make_data
from panicreg.glm import LINEAR, LOGISTIC, POISSON, CoefficientVector, Dataset, risk_gradient
from panicreg.penalty import LASSO, PenaltySpec
from panicreg.solver import DEFAULT_CONFIG, SolverConfig, fit_erm, fit_penalized, intercept_only

SPECS = [LASSO, PenaltySpec.from_name("l2"), PenaltySpec.from_name("elasticnet", 0.6)]


def test_two_point_exact_line():
    data = Dataset(np.array([[1.0], [2.0]]), np.array([2.0, 4.0]))
    fit = fit_penalized(LINEAR, data, LASSO, 0.0)
    assert fit.converged
    assert fit.beta.intercept == pytest.approx(0, abs=1e-6)
    assert fit.beta.slopes[0] == pytest.approx(2, abs=1e-6)
    assert fit.risk == pytest.approx(0, abs=1e-12)


def univariate_lasso(x, y, lam):
    # centered data: minimize mean (y - b x)^2 + lam |b|
    sxy, sxx = np.mean(x * y), np.mean(x * x)
    return np.sign(sxy) * max(abs(sxy) - lam / 2, 0) / sxx


@pytest.mark.parametrize("seed", range(5))
def test_univariate_lasso_closed_form(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=60)
    y = 0.8 * x + rng.normal(size=60)
    x -= x.mean()
    y -= y.mean()
    data = Dataset(x[:, None], y)
    for lam in (0.0, 0.05, 0.3, 1.0, 5.0):
        fit = fit_penalized(LINEAR, data, LASSO, lam)
        assert fit.converged
        assert fit.beta.slopes[0] == pytest.approx(univariate_lasso(x, y, lam), abs=1e-6)
        assert fit.beta.intercept == pytest.approx(0, abs=1e-6)


def test_huge_lambda_gives_intercept_only(family):
    data = make_data(family, seed=2)
    for spec in SPECS:
        fit = fit_penalized(family, data, spec, 1e10)
        assert np.all(fit.beta.slopes == 0)
        from panicreg.glm import empirical_risk
        oracle = minimize_scalar(lambda b0: empirical_risk(family, CoefficientVector(b0, np.zeros(data.d)), data),
                                 bounds=(-10, 10), method="bounded", options={"xatol": 1e-10})
        assert fit.beta.intercept == pytest.approx(oracle.x, abs=1e-5)
        assert intercept_only(family, data).beta.intercept == pytest.approx(oracle.x, abs=1e-5)


def test_linear_erm_matches_normal_equations():
    data = make_data(LINEAR, n=200, d=6, seed=7)
    fit = fit_erm(LINEAR, data)
    assert fit.converged
    a = np.column_stack([np.ones(data.n), data.x])
    sol = np.linalg.lstsq(a, data.y, rcond=None)[0]
    assert fit.beta.intercept == pytest.approx(sol[0], abs=1e-6)
    assert np.allclose(fit.beta.slopes, sol[1:], atol=1e-6)
    g0, g = risk_gradient(LINEAR, fit.beta, data)
    assert np.linalg.norm(np.r_[g0, g]) <= 1e-6


def test_linear_erm_row_path_matches_gram_path():
    data = make_data(LINEAR, n=150, d=5, seed=9)
    a = fit_erm(LINEAR, data, DEFAULT_CONFIG.updated(use_gram=False))
    b = fit_erm(LINEAR, data, DEFAULT_CONFIG.updated(use_gram=True))
    assert np.allclose(a.beta.slopes, b.beta.slopes, atol=1e-6)


def test_separable_logistic_erm_fails():
    x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    data = Dataset(x, np.array([0.0, 0.0, 1.0, 1.0]), LOGISTIC)
    fit = fit_erm(LOGISTIC, data, SolverConfig(max_iterations=3000))
    assert not fit.converged
    assert "unbounded" in fit.message


def test_poisson_constant_response():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 3))
    x -= x.mean(axis=0)
    data = Dataset(x, np.full(50, 3.0), POISSON)
    fit = fit_erm(POISSON, data)
    assert fit.converged
    assert fit.beta.intercept == pytest.approx(math.log(3), abs=1e-6)
    assert np.allclose(fit.beta.slopes, 0, atol=1e-6)


def check_kkt(spec, lam, g, b, tol):
    if spec.kind.value == "l1":
        for gj, bj in zip(g, b):
            if bj == 0:
                assert abs(gj) <= lam + tol
            else:
                assert abs(gj + lam * np.sign(bj)) <= tol
    elif spec.kind.value == "l2":
        nb = np.linalg.norm(b)
        if nb == 0:
            assert np.linalg.norm(g) <= lam + tol
        else:
            assert np.linalg.norm(g + lam * b / nb) <= tol * math.sqrt(len(b))
    else:
        a = spec.alpha
        for gj, bj in zip(g, b):
            if bj == 0:
                assert abs(gj) <= lam * a + tol
            else:
                assert abs(gj + lam * a * np.sign(bj) + 2 * lam * (1 - a) * bj) <= tol


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_kkt_conditions(family, spec):
    data = make_data(family, seed=3)
    for lam in (0.01, 0.05, 0.2):
        fit = fit_penalized(family, data, spec, lam)
        assert fit.converged, fit.status
        g0, g = risk_gradient(family, fit.beta, data)
        assert abs(g0) <= 1e-7
        check_kkt(spec, lam, g, fit.beta.slopes, 1e-7)


def test_objective_monotone_without_acceleration(family):
    data = make_data(family, seed=5)
    fit = fit_penalized(family, data, LASSO, 0.02, SolverConfig(record_trace=True))
    trace = fit.trace
    assert len(trace) == fit.iterations + 1
    assert np.all(np.diff(trace) <= 1e-12 * np.maximum(1, np.abs(trace[:-1])))


def test_accelerated_reaches_same_solution(family):
    data = make_data(family, seed=6)
    a = fit_penalized(family, data, LASSO, 0.03)
    b = fit_penalized(family, data, LASSO, 0.03, SolverConfig(accelerate=True))
    assert b.converged
    assert np.allclose(a.beta.slopes, b.beta.slopes, atol=1e-5)


def test_exact_zeros_from_l1():
    data = make_data(LINEAR, n=100, d=8, seed=11)
    fit = fit_penalized(LINEAR, data, LASSO, 0.5)
    b = fit.beta.slopes
    assert np.any(b == 0.0)
    assert not np.any((b != 0) & (np.abs(b) < 1e-12))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), fam=st.sampled_from(FAMILIES), spec=st.sampled_from(SPECS))
def test_warm_starts_agree(seed, fam, spec):
    data = make_data(fam, n=60, d=3, seed=seed)
    rng = np.random.default_rng(seed)
    lam = 0.02
    a = fit_penalized(fam, data, spec, lam)
    start = CoefficientVector(0.1 * rng.normal(), 0.3 * rng.normal(size=3))
    b = fit_penalized(fam, data, spec, lam, warm_start=start)
    assert a.converged and b.converged
    assert np.allclose(a.beta.slopes, b.beta.slopes, atol=1e-5)
    assert a.beta.intercept == pytest.approx(b.beta.intercept, abs=1e-5)


def test_bad_arguments():
    data = make_data(LINEAR, seed=0)
    with pytest.raises(ValueError):
        fit_penalized(LINEAR, data, LASSO, -1.0)
    with pytest.raises(ValueError):
        SolverConfig(shrink=1.5)
    with pytest.raises(ValueError):
        fit_penalized(LINEAR, data, LASSO, 0.1, warm_start=CoefficientVector.zeros(2))


def test_to_dict_round_trips_through_json():
    import json
    fit = fit_penalized(LINEAR, make_data(LINEAR, seed=0), LASSO, 0.1)
    back = json.loads(json.dumps(fit.to_dict()))
    assert back["slopes"] == fit.beta.slopes.tolist()
    assert back["status"] == "converged"
