import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import expit

from logitval import (
    Dataset, EstimatorKind, EstimatorSpec, Separation, detect_separation, effective_df,
    fisher_components, fit, fit_batch, fit_firth, fit_ml, fit_ridge, fit_ridge_fixed,
    log_likelihood, penalized_log_likelihood, predict_probs,
)
from logitval.estimators import Design, _newton, _start, score
from logitval.exceptions import (
    CollinearDesign, DimensionMismatch, SingleClassOutcome, SingularInformation,
)

from conftest import make_data

ML = EstimatorSpec(EstimatorKind.ML)
FL = EstimatorSpec(EstimatorKind.FIRTH)
RR = EstimatorSpec(EstimatorKind.RIDGE)


def two_by_two():
    x = np.array([0, 0, 0, 0, 1, 1, 1, 1.0])
    y = np.array([1, 1, 0, 0, 1, 1, 1, 0.0])
    return Dataset(y, x[:, None])


def separated(n=10):
    x = np.arange(n, dtype=float)
    return Dataset((x >= n / 2).astype(float), x[:, None])


# --- estimator settings validation ----------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(max_iterations=0), dict(convergence_tolerance=0.0),
    dict(lambda_grid=(1.0, 2.0)), dict(lambda_grid=(0.0, 2.0, 1.0)), dict(lambda_grid=()),
])
def test_spec_rejects_bad_settings(kw):
    with pytest.raises(ValueError):
        EstimatorSpec(EstimatorKind.RIDGE, **kw)


def test_default_grid_shape():
    grid = RR.grid_for([50])[0]
    assert grid[0] == 0 and grid.size == 97
    assert np.isclose(grid[1], 50e-4) and np.isclose(grid[-1], 50e4)
    assert np.all(np.diff(grid) > 0)


# --- maximum likelihood ---------------------------------------------------------

def test_ml_two_by_two_closed_form():
    m = fit_ml(two_by_two())
    np.testing.assert_allclose(m.beta, [0.0, np.log(3.0)], atol=1e-9)
    assert m.converged and m.df_e == 2 and m.lam is None


def test_ml_loglik_matches_direct_sum():
    d = two_by_two()
    m = fit_ml(d)
    p = predict_probs(m, d.X)
    assert m.loglik == pytest.approx(np.sum(d.y * np.log(p) + (1 - d.y) * np.log(1 - p)))


def test_ml_diverges_under_separation():
    d = separated()
    short = fit_ml(d, EstimatorSpec("ml", max_iterations=10))
    long = fit_ml(d, EstimatorSpec("ml", max_iterations=25))
    assert not long.converged and long.n_iter == 25
    assert abs(long.beta[1]) > abs(short.beta[1]) > 1.0
    assert long.separation_detected


def test_ml_errors():
    with pytest.raises(SingleClassOutcome):
        fit_ml(Dataset(np.ones(5), np.arange(5.0)[:, None]))
    X = np.column_stack([np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(CollinearDesign) as err:
        fit_ml(Dataset(np.array([0, 1, 0, 1, 1, 0.0]), X, ("a", "b")))
    assert "a" in str(err.value) or "b" in str(err.value)


def test_constant_column_named():
    X = np.column_stack([np.arange(6.0), np.full(6, 3.0)])
    with pytest.raises(CollinearDesign) as err:
        fit_ml(Dataset(np.array([0, 1, 0, 1, 1, 0.0]), X, ("age", "const")))
    assert err.value.columns in (("(intercept)",), ("const",))


def test_ml_score_zero_at_optimum(small_data):
    m = fit_ml(small_data)
    np.testing.assert_allclose(score(small_data, m.beta, "ml"), 0.0, atol=1e-7)


def test_wrong_kind_rejected(small_data):
    with pytest.raises(ValueError):
        fit_ml(small_data, FL)


# --- Firth ------------------------------------------------------------------------

def _firth_intercept_only(y):
    n = y.size
    design = Design(np.zeros((n, 0)))
    c = np.ones((1, n))
    gamma, conv, *_ = _newton(design, y, c, _start(design, y, c), FL, firth=True)
    assert conv[0]
    return gamma[0, 0]


def test_firth_intercept_only_matches_oracle():
    y = np.r_[np.ones(2), np.zeros(8)]
    # oracle: binomial log-likelihood plus half the log Fisher information, maximized in 1-D
    def neg(b):
        p = expit(b)
        return -(2 * np.log(p) + 8 * np.log1p(-p) + 0.5 * np.log(10 * p * (1 - p)))
    oracle = minimize_scalar(neg, bounds=(-5, 5), method="bounded", options={"xatol": 1e-12}).x
    b0 = _firth_intercept_only(y)
    assert b0 == pytest.approx(oracle, abs=1e-6)
    assert b0 == pytest.approx(np.log(2.5 / 8.5), abs=1e-6)


def test_firth_intercept_only_balanced():
    assert _firth_intercept_only(np.r_[np.ones(5), np.zeros(5)]) == pytest.approx(0.0, abs=1e-10)


def test_firth_finite_under_separation():
    m = fit_firth(separated())
    assert m.converged and np.all(np.isfinite(m.beta)) and abs(m.beta[1]) < 10


def test_firth_modified_score_zero(small_data):
    m = fit_firth(small_data)
    np.testing.assert_allclose(score(small_data, m.beta, "firth"), 0.0, atol=1e-7)


def test_firth_shrinks_toward_zero(small_data):
    assert np.linalg.norm(fit_firth(small_data).beta[1:]) < np.linalg.norm(fit_ml(small_data).beta[1:])


def test_firth_finite_on_separated_generated_datasets():
    rng = np.random.default_rng(7)
    found = 0
    while found < 100:
        d = make_data(rng, n=15, p=2, beta=[0.0, 2.5, -2.0])
        if detect_separation(d) is not Separation.SEPARATED:
            continue
        found += 1
        m = fit_firth(d)
        assert np.all(np.isfinite(m.beta)), d


# --- ridge --------------------------------------------------------------------------

def test_ridge_zero_penalty_equals_ml(small_data):
    np.testing.assert_allclose(fit_ridge_fixed(small_data, 0.0).beta, fit_ml(small_data).beta, atol=1e-6)


def test_ridge_single_point_grid_equals_ml(small_data):
    m = fit_ridge(small_data, EstimatorSpec("ridge", lambda_grid=(0.0,)))
    np.testing.assert_allclose(m.beta, fit_ml(small_data).beta, atol=1e-8)
    assert m.lam == 0


def test_ridge_huge_penalty_gives_event_rate(small_data):
    m = fit_ridge_fixed(small_data, 1e8)
    np.testing.assert_allclose(m.beta[1:], 0.0, atol=1e-5)
    np.testing.assert_allclose(m.predict(small_data.X), small_data.y.mean(), atol=1e-5)
    assert m.df_e == pytest.approx(1.0, abs=1e-4)


def test_ridge_penalty_is_scale_free(small_data):
    scaled = Dataset(small_data.y, small_data.X * np.array([1.0, 100.0, 0.01]))
    a = fit_ridge_fixed(small_data, 3.0)
    b = fit_ridge_fixed(scaled, 3.0)
    np.testing.assert_allclose(a.predict(small_data.X), b.predict(scaled.X), atol=1e-9)


def test_ridge_fixed_score_zero(small_data):
    m = fit_ridge_fixed(small_data, 2.5)
    np.testing.assert_allclose(score(small_data, m.beta, "ridge", 2.5), 0.0, atol=1e-7)


def test_effective_df_bounds_and_monotone(rng):
    d = make_data(rng, n=20, p=3)
    grid = np.r_[0.0, np.logspace(-3, 5, 30)]
    dfs = np.array([effective_df(d, fit_ridge_fixed(d, lam), lam) for lam in grid])
    assert dfs[0] == 4
    assert np.all(np.diff(dfs) <= 1e-10)
    assert np.all((dfs > 0) & (dfs <= 4))
    assert np.all((dfs[1:-1] > 1) & (dfs[1:-1] < 4))
    assert dfs[-1] == pytest.approx(1.0, abs=1e-2)


def test_fixed_fit_reports_df(small_data):
    m = fit_ridge_fixed(small_data, 5.0)
    assert m.df_e == pytest.approx(effective_df(small_data, m, 5.0))
    assert m.lam == 5.0


def test_ridge_aic_choice_is_grid_minimum(small_data):
    grid = tuple(np.r_[0.0, np.logspace(-2, 3, 12)])
    m = fit_ridge(small_data, EstimatorSpec("ridge", lambda_grid=grid))
    aics = []
    for lam in grid:
        f = fit_ridge_fixed(small_data, lam)
        aics.append(-2 * f.loglik + 2 * f.df_e)
    k = int(np.argmin(aics))
    assert m.lam == pytest.approx(grid[k])
    assert -2 * m.loglik + 2 * m.df_e == pytest.approx(min(aics), rel=1e-8)


def test_ridge_null_data_shrinks():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(100, 5))
    y = (rng.random(100) < 0.3).astype(float)
    m = fit_ridge(Dataset(y, X))
    assert m.df_e < 2
    assert np.max(np.abs(m.beta[1:])) < 0.1


def test_ridge_large_n_strong_signal_near_ml():
    rng = np.random.default_rng(4)
    d = make_data(rng, n=3000, p=2, beta=[0.0, 1.5, -1.0])
    r, m = fit_ridge(d), fit_ml(d)
    np.testing.assert_allclose(r.beta, m.beta, rtol=0.02, atol=0.02)


# --- shared invariants --------------------------------------------------------------

@pytest.mark.parametrize("kind,lam", [("ml", 0.0), ("firth", 0.0), ("ridge", 0.7)])
def test_gradient_matches_finite_differences(rng, kind, lam):
    d = make_data(rng, n=30, p=3)
    for _ in range(5):
        beta = rng.normal(scale=0.5, size=4)
        g = score(d, beta, kind, lam)
        h = 1e-5
        fd = np.array([
            (penalized_log_likelihood(d, beta + h * e, kind, lam)
             - penalized_log_likelihood(d, beta - h * e, kind, lam)) / (2 * h)
            for e in np.eye(4)
        ])
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


@pytest.mark.parametrize("kind", ["ml", "firth", "ridge"])
def test_objective_monotone_over_iterations(rng, kind):
    d = make_data(rng, n=25, p=3, beta=[0.0, 2.0, -1.5, 1.0])
    design = Design(d.X)
    c = np.ones((1, d.n))
    pen = np.array([[0.0, 0.3, 0.3, 0.3]]) if kind == "ridge" else None
    gamma = _start(design, d.y, c)
    values = []
    for it in range(1, 15):
        g, *_rest, obj, _ = _newton(design, d.y, c, gamma, EstimatorSpec(kind, max_iterations=1),
                                    firth=kind == "firth", pen=pen)
        values.append(obj[0])
        gamma = g
    assert np.all(np.diff(values) >= -1e-12 * (1 + np.abs(values[:-1])))


@pytest.mark.parametrize("spec", [ML, FL])
def test_shift_only_moves_intercept(small_data, spec):
    shifted = Dataset(small_data.y, small_data.X + np.array([5.0, -3.0, 100.0]))
    a, b = fit(small_data, spec), fit(shifted, spec)
    np.testing.assert_allclose(a.beta[1:], b.beta[1:], atol=1e-7)
    np.testing.assert_allclose(a.predict(small_data.X), b.predict(shifted.X), atol=1e-8)


def test_frequency_weights_equal_duplication(small_data):
    w = np.arange(small_data.n) % 3
    dup = small_data.subset(np.repeat(np.arange(small_data.n), w))
    for spec in (ML, FL, RR):
        batch = fit_batch(small_data, spec, w[None, :])
        np.testing.assert_allclose(batch.beta[0], fit(dup, spec).beta, atol=1e-6)


def test_batch_rows_match_single_fits(small_data, rng):
    W = (rng.random((4, small_data.n)) < 0.8).astype(float)
    batch = fit_batch(small_data, RR, W)
    for row, beta in zip(W, batch.beta):
        sub = small_data.subset(np.flatnonzero(row))
        np.testing.assert_allclose(beta, fit_ridge(sub).beta, atol=1e-6)


# --- predictions and Fisher components ----------------------------------------------

def test_predict_probs_examples():
    X = np.arange(6.0).reshape(3, 2)
    np.testing.assert_allclose(predict_probs(np.zeros(3), X), 0.5)
    np.testing.assert_allclose(predict_probs(np.r_[np.log(1 / 3), 0, 0], X), 0.25)
    with pytest.raises(DimensionMismatch):
        predict_probs(np.zeros(4), X)


def test_fisher_two_obs_intercept_only():
    d = Dataset(np.array([0.0, 1.0]), np.zeros((2, 1)))
    with pytest.raises(SingularInformation):
        fisher_components(d, np.zeros(2))
    design_h = Design(np.zeros((2, 0)))
    pi = np.full(2, 0.5)
    info = (pi * (1 - pi)) @ design_h.outer
    h = pi * (1 - pi) * design_h.X1[:, 0] ** 2 / info[0]
    np.testing.assert_allclose(h, [0.5, 0.5])


def test_fisher_trace_and_hessian(rng):
    d = make_data(rng, n=10, p=2)
    beta = rng.normal(scale=0.4, size=3)
    fc = fisher_components(d, beta)
    assert fc.hat_diagonals.sum() == pytest.approx(3.0)
    assert np.all((fc.hat_diagonals >= 0) & (fc.hat_diagonals <= 1))
    np.testing.assert_allclose(fc.info, fc.info.T)
    h = 1e-4
    hess = np.array([
        (score(d, beta + h * e, "ml") - score(d, beta - h * e, "ml")) / (2 * h) for e in np.eye(3)
    ])
    np.testing.assert_allclose(-hess, fc.info, rtol=1e-5, atol=1e-8)


def test_log_likelihood_at_zero(small_data):
    assert log_likelihood(small_data, np.zeros(4)) == pytest.approx(-small_data.n * np.log(2))
