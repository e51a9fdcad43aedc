import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import normal_equations, svr_grid_min
from soilnir.regression import (
    LASSO,
    LR_BF,
    OLS,
    PLSR,
    SVR,
    RegressionModel,
    fit_lasso,
    fit_lasso_cv,
    fit_lr_best_feature,
    fit_ols,
    fit_plsr,
    fit_regressor,
    fit_svr_linear,
    lambda_max,
    lasso_coordinate_descent,
    plsr_components,
    predict,
    svr_objective,
)


def _z(X):
    return (X - X.mean(0)) / X.std(0)


def kkt_violation(X, y, beta, b, lam):
    g = X.T @ (y - X @ beta - b) / len(y)
    nz = beta != 0
    v_nz = np.abs(g[nz] - lam * np.sign(beta[nz]))
    v_z = np.maximum(np.abs(g[~nz]) - lam, 0)
    return max(v_nz.max(initial=0), v_z.max(initial=0))


# OLS

def test_ols_exact_line():
    x = np.arange(5.0)
    m = fit_ols(x[:, None], 2 * x + 1)
    assert m.coefficients[0] == pytest.approx(2) and m.intercept == pytest.approx(1)
    np.testing.assert_allclose(predict(m, x[:, None]), 2 * x + 1, atol=1e-9)


def test_ols_constant_target_min_norm(rng):
    m = fit_ols(rng.normal(size=(10, 4)), np.full(10, 7.0))
    np.testing.assert_allclose(m.coefficients, 0, atol=1e-12)
    assert m.intercept == pytest.approx(7)


def test_ols_matches_normal_equations(rng):
    X, y = rng.normal(size=(20, 5)), rng.normal(size=20)
    m = fit_ols(X, y)
    w, b = normal_equations(X, y)
    np.testing.assert_allclose(predict(m, X), X @ w + b, atol=1e-8)


def test_ols_rank_deficient_is_min_norm(rng):
    x = rng.normal(size=(15, 1))
    X = np.hstack([x, x])
    m = fit_ols(X, 3 * x[:, 0])
    np.testing.assert_allclose(m.coefficients, [1.5, 1.5], atol=1e-10)


def test_ols_rejects_non_finite():
    with pytest.raises(ValueError):
        fit_ols(np.array([[1.0], [np.nan]]), np.array([1.0, 2.0]))


# LASSO

def test_lasso_at_lambda_max_is_zero(rng):
    X, y = _z(rng.normal(size=(40, 8))), rng.normal(size=40)
    beta, b = lasso_coordinate_descent(X, y, lambda_max(X, y))
    assert np.all(beta == 0)
    assert b == pytest.approx(y.mean())


def test_lasso_zero_penalty_matches_ols(rng):
    X = rng.normal(size=(30, 4))
    y = X @ [1.0, -2.0, 0.5, 3.0] + 0.1 * rng.normal(size=30)
    beta, b = lasso_coordinate_descent(X, y, 0.0, tol=1e-12)
    ols = fit_ols(X, y)
    np.testing.assert_allclose(beta, ols.coefficients, atol=1e-4)
    assert b == pytest.approx(ols.intercept, abs=1e-4)


def test_lasso_cv_recovers_planted_support(rng):
    X = _z(rng.normal(size=(100, 50)))
    y = 2.0 * X[:, 7] - 1.5 * X[:, 31] + 0.01 * rng.normal(size=100)
    m = fit_lasso_cv(X, y, seed=1)
    assert {7, 31} <= set(np.flatnonzero(m.coefficients).tolist())
    assert len(m.hyperparams["lambda_path"]) == 100
    path = np.array(m.hyperparams["lambda_path"])
    assert path[-1] / path[0] == pytest.approx(1e-3)
    np.testing.assert_allclose(np.diff(np.log(path)), np.log(1e-3) / 99)


def test_lasso_cv_kkt_at_selected_lambda(rng):
    X = _z(rng.normal(size=(60, 30)))
    y = X[:, :3] @ [1.0, 0.5, -0.7] + 0.3 * rng.normal(size=60)
    m = fit_lasso_cv(X, y, seed=0)
    lam = m.hyperparams["lambda_selected"]
    assert kkt_violation(X, y, m.coefficients, m.intercept, lam) < 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), frac=st.floats(0.01, 0.9))
def test_lasso_kkt_property(seed, frac):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(25, 12)), rng.normal(size=25)
    lam = frac * lambda_max(X, y)
    beta, b = lasso_coordinate_descent(X, y, lam, tol=1e-10)
    assert kkt_violation(X, y, beta, b, lam) < 1e-6


def test_lasso_objective_non_increasing(rng):
    X, y = rng.normal(size=(30, 20)), rng.normal(size=30)
    *_, hist = lasso_coordinate_descent(X, y, 0.05 * lambda_max(X, y), return_history=True)
    assert len(hist) > 2
    assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]))


def test_lasso_cv_errors_and_constant_target(rng):
    X = rng.normal(size=(4, 3))
    with pytest.raises(ValueError):
        fit_lasso_cv(X, rng.normal(size=4), folds=5)
    m = fit_lasso_cv(rng.normal(size=(10, 3)), np.full(10, 2.0))
    assert np.all(m.coefficients == 0) and m.intercept == 2.0


def test_lasso_cv_deterministic_and_jobs_invariant(rng):
    X = _z(rng.normal(size=(50, 20)))
    y = X[:, 0] + 0.5 * rng.normal(size=50)
    a = fit_lasso_cv(X, y, seed=4)
    b = fit_lasso_cv(X, y, seed=4, jobs=2)
    assert a.hyperparams["lambda_selected"] == b.hyperparams["lambda_selected"]
    assert np.array_equal(a.coefficients, b.coefficients)


def test_fixed_lambda_matches_cv_refit(rng):
    X = _z(rng.normal(size=(50, 20)))
    y = X[:, 0] + 0.5 * rng.normal(size=50)
    cv = fit_lasso_cv(X, y, seed=2)
    fixed = fit_lasso(X, y, cv.hyperparams["lambda_selected"])
    np.testing.assert_allclose(fixed.coefficients, cv.coefficients, atol=1e-7)


# SVR

def test_svr_interpolable_line():
    # wide enough x that C * max|x| outweighs shrinking w below 3
    x = np.linspace(-5, 5, 11)
    m = fit_svr_linear(x[:, None], 3 * x, C=1.0, epsilon=0.1)
    r = 3 * x - predict(m, x[:, None])
    assert np.all(np.abs(r) <= 0.1 + 1e-3)
    assert svr_objective(x[:, None], 3 * x, m.coefficients, m.intercept) <= 0.5 * 9 + 1e-9


def test_svr_matches_grid_brute_force():
    rng = np.random.default_rng(7)
    x = rng.normal(size=6)
    y = 1.3 * x + 0.4 + 0.5 * rng.normal(size=6)
    m = fit_svr_linear(x[:, None], y, C=1.0, epsilon=0.1)
    got = svr_objective(x[:, None], y, m.coefficients, m.intercept, 1.0, 0.1)
    best, *_ = svr_grid_min(x, y, 1.0, 0.1, (-5, 5), (-5, 5), 401)
    assert abs(got - best) <= 1e-3


def test_svr_duplicated_data_half_c(rng):
    X = rng.normal(size=(30, 3))
    y = X @ [1.0, -1.0, 0.5] + 0.3 * rng.normal(size=30)
    a = fit_svr_linear(X, y, C=1.0, tol=1e-6)
    b = fit_svr_linear(np.vstack([X, X]), np.concatenate([y, y]), C=0.5, tol=1e-6)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-3)


def test_svr_dual_feasibility_and_slackness(rng):
    X = rng.normal(size=(40, 2))
    y = X @ [2.0, -1.0] + 0.5 * rng.normal(size=40)
    C, eps = 1.0, 0.1
    m = fit_svr_linear(X, y, C=C, epsilon=eps, tol=1e-6)
    a = np.array(m.hyperparams["dual_alpha"])
    s = np.array(m.hyperparams["dual_alpha_star"])
    assert np.all((a >= 0) & (a <= C)) and np.all((s >= 0) & (s <= C))
    r = y - predict(m, X)
    slack = 1e-4
    assert np.all(np.abs(r[(a == 0) & (s == 0)]) <= eps + slack)
    free = ((a > 0) & (a < C)) | ((s > 0) & (s < C))
    np.testing.assert_allclose(np.abs(r[free]), eps, atol=slack)
    assert np.all(np.abs(r[(a == C) | (s == C)]) >= eps - slack)


@pytest.mark.parametrize("kw", [{"C": 0}, {"epsilon": 0}, {"C": -1}])
def test_svr_rejects_bad_params(kw):
    with pytest.raises(ValueError):
        fit_svr_linear(np.ones((3, 1)), np.arange(3.0), **kw)


# LR-bf

def test_lr_bf_column_equal_to_y(rng):
    X = rng.normal(size=(20, 4))
    m = fit_lr_best_feature(X, X[:, 2].copy())
    assert m.hyperparams["feature_index"] == 2
    np.testing.assert_allclose(predict(m, X), X[:, 2], atol=1e-12)
    assert np.count_nonzero(m.coefficients) == 1


def _with_correlation(y, r, noise):
    yz = (y - y.mean()) / y.std()
    nz = noise - noise.mean()
    nz -= (nz @ yz) / (yz @ yz) * yz
    nz /= nz.std()
    return r * yz + np.sqrt(1 - r * r) * nz


def test_lr_bf_uses_absolute_correlation(rng):
    y = rng.normal(size=50)
    a = _with_correlation(y, 0.9, rng.normal(size=50))
    b = _with_correlation(y, -0.95, rng.normal(size=50))
    assert np.corrcoef(a, y)[0, 1] == pytest.approx(0.9)
    m = fit_lr_best_feature(np.column_stack([a, b]), y)
    assert m.hyperparams["feature_index"] == 1


def test_lr_bf_tie_goes_to_lower_index(rng):
    X = rng.normal(size=(20, 9))
    X[:, 7] = X[:, 3]
    y = 2 * X[:, 3] + 0.1 * rng.normal(size=20)
    assert fit_lr_best_feature(X, y).hyperparams["feature_index"] == 3


def test_lr_bf_all_constant():
    with pytest.raises(ValueError):
        fit_lr_best_feature(np.ones((5, 3)), np.arange(5.0))


# PLSR

def test_plsr_full_rank_equals_ols(rng):
    X, y = rng.normal(size=(12, 4)), rng.normal(size=12)
    np.testing.assert_allclose(predict(fit_plsr(X, y, 4), X), predict(fit_ols(X, y), X),
                               atol=1e-6)


def test_plsr_single_column(rng):
    x = rng.normal(size=(15, 1))
    y = 1.5 * x[:, 0] + rng.normal(size=15)
    np.testing.assert_allclose(fit_plsr(x, y, 1).coefficients, fit_ols(x, y).coefficients,
                               atol=1e-8)


def test_plsr_orthogonal_target():
    X = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]])
    y = np.array([1.0, 1, 3, 3])
    with pytest.warns(UserWarning, match="exhausted"):
        m = fit_plsr(X, y, 2)
    np.testing.assert_allclose(m.coefficients, 0)
    assert m.intercept == pytest.approx(2.0)


def test_plsr_scores_orthogonal(rng):
    X, y = rng.normal(size=(40, 10)), rng.normal(size=40)
    T = plsr_components(X, y, 6)["T"]
    G = T.T @ T
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() <= 1e-8 * np.abs(np.diag(G)).max()


def test_plsr_component_bounds(rng):
    with pytest.raises(ValueError):
        fit_plsr(rng.normal(size=(5, 10)), rng.normal(size=5), 5)


@pytest.mark.parametrize("kind", [OLS, PLSR])
def test_target_standardization_equivariance(kind, rng):
    X = rng.normal(size=(30, 6))
    y = X @ rng.normal(size=6) + rng.normal(size=30) + 10
    direct = predict(fit_regressor(kind, X, y), X)
    mu, sd = y.mean(), y.std()
    scaled = predict(fit_regressor(kind, X, (y - mu) / sd), X) * sd + mu
    np.testing.assert_allclose(direct, scaled, atol=1e-8)


# predict / persistence

def test_predict_zero_model_and_dimension_check():
    m = RegressionModel(OLS, np.zeros(3), 4.5)
    np.testing.assert_array_equal(predict(m, np.ones((2, 3))), [4.5, 4.5])
    with pytest.raises(ValueError):
        predict(m, np.ones((2, 4)))


@pytest.mark.parametrize("kind", [OLS, SVR, LASSO, LR_BF, PLSR])
def test_json_round_trip_bit_identical(kind, rng):
    X, y = rng.normal(size=(30, 8)), rng.normal(size=30)
    m = fit_regressor(kind, X, y, seed=0, feature_names=[f"f{i}" for i in range(8)])
    back = RegressionModel.from_json(m.to_json())
    assert back.kind == kind
    assert np.array_equal(predict(back, X), predict(m, X))


@pytest.mark.parametrize("kind", [OLS, SVR, LASSO, LR_BF, PLSR])
def test_fitters_deterministic(kind, rng):
    X, y = rng.normal(size=(30, 8)), rng.normal(size=30)
    a = fit_regressor(kind, X, y, seed=3)
    b = fit_regressor(kind, X, y, seed=3)
    assert np.array_equal(a.coefficients, b.coefficients) and a.intercept == b.intercept
