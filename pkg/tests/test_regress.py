import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tradeflag.errors import RankDeficient, SchemaMismatch, TooFewRows
from tradeflag.regress import RegressionFit, fit_ols, predict, residuals


def _design(n, rng, k=3):
    return np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])


def test_noiseless_line():
    X = np.column_stack([np.ones(3), [1.0, 2.0, 3.0]])
    y = np.array([3.0, 5.0, 7.0])
    fit = fit_ols(X, y, ["intercept", "x"])
    np.testing.assert_allclose(fit.coefficients, [1.0, 2.0], atol=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.residual_std_error == pytest.approx(0.0, abs=1e-12)
    assert predict(fit, {"intercept": 1.0, "x": 3.0}) == pytest.approx(7.0)


def test_recovers_coefficients_within_standard_errors(rng):
    beta = np.array([1.5, -2.0, 0.7])
    X = _design(5000, rng)
    y = X @ beta + rng.normal(scale=2.0, size=5000)
    fit = fit_ols(X, y)
    assert np.all(np.abs(fit.coefficients - beta) < 4 * fit.standard_errors)
    assert fit.residual_std_error == pytest.approx(2.0, rel=0.05)


def test_standard_errors_match_normal_equations(rng):
    X = _design(400, rng, k=5)
    y = X @ np.arange(5.0) + rng.normal(size=400)
    fit = fit_ols(X, y)
    # textbook oracle; fine for a well-conditioned design
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    r = y - X @ beta
    s2 = r @ r / (400 - 5)
    se = np.sqrt(np.diag(np.linalg.inv(X.T @ X)) * s2)
    np.testing.assert_allclose(fit.coefficients, beta, rtol=1e-8)
    np.testing.assert_allclose(fit.standard_errors, se, rtol=1e-8)


def test_matches_lstsq_on_market(market_design):
    d = market_design
    fit = fit_ols(d.X, d.y, d.columns)
    beta = np.linalg.lstsq(d.X, d.y, rcond=None)[0]
    np.testing.assert_allclose(predict(fit, d.X), d.X @ beta, rtol=1e-7, atol=1e-6)


def test_residuals_orthogonal(rng):
    X = _design(300, rng, k=4)
    y = rng.normal(size=300) + X[:, 1]
    fit = fit_ols(X, y)
    r = residuals(fit, X, y)
    assert abs(r.sum()) < 1e-8 * np.abs(y).sum()
    np.testing.assert_allclose(X.T @ r, 0.0, atol=1e-8)
    np.testing.assert_allclose(r, y - fit.fitted_values, atol=1e-10)


def test_scale_equivariance(rng):
    X = _design(200, rng)
    y = X @ [1.0, 2.0, 3.0] + rng.normal(size=200)
    fit = fit_ols(X, y)
    Xs = X.copy()
    Xs[:, 2] *= 1000.0
    fs = fit_ols(Xs, y)
    assert fs.coefficients[2] == pytest.approx(fit.coefficients[2] / 1000.0, rel=1e-9)
    assert fs.r_squared == pytest.approx(fit.r_squared, rel=1e-12)


def test_duplicate_column_rank_deficient(rng):
    X = _design(50, rng)
    X = np.column_stack([X, X[:, 1]])
    with pytest.raises(RankDeficient) as exc:
        fit_ols(X, rng.normal(size=50), ["c", "a", "b", "a2"])
    assert set(exc.value.columns) & {"a", "a2"}


def test_zero_column_rank_deficient(rng):
    X = _design(20, rng)
    X[:, 2] = 0
    with pytest.raises(RankDeficient):
        fit_ols(X, rng.normal(size=20))


def test_shape_errors(rng):
    X = _design(10, rng)
    with pytest.raises(SchemaMismatch):
        fit_ols(X, np.zeros(9))
    with pytest.raises(SchemaMismatch):
        fit_ols(X, np.zeros(10), ["a"])
    with pytest.raises(TooFewRows):
        fit_ols(X[:2], np.zeros(2))
    fit = fit_ols(X, rng.normal(size=10))
    with pytest.raises(SchemaMismatch):
        predict(fit, {"x0": 1.0})
    with pytest.raises(SchemaMismatch):
        predict(fit, np.zeros(4))


def test_json_round_trip(rng):
    X = _design(30, rng)
    fit = fit_ols(X, rng.normal(size=30))
    again = RegressionFit.from_json(fit.to_json())
    np.testing.assert_array_equal(again.coefficients, fit.coefficients)
    assert again.to_json() == fit.to_json()


def test_significance_stars():
    X = np.column_stack([np.ones(4), [0.0, 1.0, 2.0, 3.0]])
    fit = fit_ols(X, np.array([0.0, 1.1, 1.9, 3.05]))
    assert fit.stars[1] == "***"


@settings(max_examples=50, deadline=None)
@given(arrays(float, (25, 3), elements=st.floats(-100, 100)),
       arrays(float, 25, elements=st.floats(-100, 100)))
def test_fit_invariants(Z, y):
    X = np.column_stack([np.ones(25), Z])
    try:
        fit = fit_ols(X, y)
    except RankDeficient:
        return
    assert fit.adjusted_r_squared <= fit.r_squared + 1e-12
    assert fit.r_squared <= 1.0 + 1e-9
    assert fit.residual_std_error ** 2 * fit.df_residual == pytest.approx(fit.rss, rel=1e-9, abs=1e-9)
    r = residuals(fit, X, y)
    assert fit.rss == pytest.approx(float(r @ r), rel=1e-6, abs=1e-6)
