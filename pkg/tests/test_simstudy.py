import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import norm

from logitval import (
    EstimatorKind, EstimatorSpec, ScenarioConfig, all_scenarios, fit_ml, gen_covariates,
    gen_dataset, independent_validation, run_scenario, scenario_coefficients, summarize,
    winsorized_summary,
)
from logitval.exceptions import InsufficientReplicates
from logitval.metrics import MetricKind
from logitval.resampling import Method
from logitval.simstudy import (
    STRONG_EFFECTS, ReplicateRecord, calibrate_intercept, gen_validation_set, jackknife_se,
    scenario_slopes, summarize_differences,
)

C, SLOPE, BRIER = MetricKind.C_STATISTIC, MetricKind.DISCRIMINATION_SLOPE, MetricKind.BRIER_SCORE


@pytest.fixture(scope="module")
def big_sample():
    return gen_covariates(1_000_000, np.random.default_rng(2024))


def test_binary_and_ordinal_marginals(big_sample):
    x1, x2 = big_sample[:, 0], big_sample[:, 1]
    assert np.mean(x1) == pytest.approx(norm.cdf(0.6), abs=0.002)
    assert np.mean(x2 == 0) == pytest.approx(norm.cdf(-1.2), abs=0.002)
    assert np.mean(x2 == 2) == pytest.approx(1 - norm.cdf(0.75), abs=0.002)


def test_binary_continuous_correlation(big_sample):
    assert np.corrcoef(big_sample[:, 0], big_sample[:, 2])[0, 1] == pytest.approx(-0.6, abs=0.02)


def test_covariates_integer_valued_and_winsorized():
    X = gen_covariates(500, np.random.default_rng(1))
    assert np.all(X[:, :2] == np.trunc(X[:, :2]))
    assert X[:, 3].min() >= 0 and X[:, 4].min() >= 0
    for j in (2, 3, 4):
        q1, q3 = np.percentile(X[:, j], [25, 75])
        cap = q3 + 5 * (q3 - q1)
        assert X[:, j].max() <= cap + 1e-9
        # values below the cap are untouched truncations; only capped values may be fractional
        below = X[:, j][X[:, j] < cap]
        assert np.all(below == np.trunc(below))


def test_blocks_winsorize_each_block_separately():
    rng = np.random.default_rng(3)
    X = gen_covariates(50, rng, blocks=4)
    assert X.shape == (4, 50, 5)


def test_slopes():
    assert scenario_slopes(1.0) == STRONG_EFFECTS
    assert scenario_slopes(0.5)[0] == pytest.approx(0.345)
    assert scenario_slopes(0.0) == (0.0,) * 5


def test_null_calibration_is_exact():
    rng = np.random.default_rng(0)
    assert calibrate_intercept((0,) * 5, 0.25, rng) == pytest.approx(np.log(1 / 3))
    assert calibrate_intercept((0,) * 5, 0.5, rng) == 0.0


def test_strong_calibration_hits_target():
    sc = ScenarioConfig(100, 0.25, 1.0)
    coefs = scenario_coefficients(sc)
    X = gen_covariates(100, np.random.default_rng(99), blocks=10_000).reshape(-1, 5)
    rate = np.mean(expit(coefs.beta0 + X @ np.array(coefs.slopes)))
    assert 0.249 <= rate <= 0.251


def test_scenario_grid_and_validation():
    scenarios = all_scenarios(n_replicates=5)
    assert len(scenarios) == 12 and len({s.label for s in scenarios}) == 12
    for bad in (dict(n=0), dict(event_rate=1.0), dict(effect_multiplier=1.5)):
        kw = dict(n=50, event_rate=0.25, effect_multiplier=1.0) | bad
        with pytest.raises(ValueError):
            ScenarioConfig(**kw)


def test_gen_dataset_deterministic():
    sc = ScenarioConfig(50, 0.25, 1.0)
    a, b, c = gen_dataset(sc, 3), gen_dataset(sc, 3), gen_dataset(sc, 4)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)
    assert not np.array_equal(gen_validation_set(sc.__class__(50, 0.25, 1.0, validation_size=50), 3).X, a.X)


def test_event_counts_match_target():
    sc = ScenarioConfig(50, 0.25, 1.0)
    k = np.array([gen_dataset(sc, s).y.sum() for s in range(1000)])
    tol = 3 * np.sqrt(50 * 0.25 * 0.75 * 1000) / 1000
    assert abs(k.mean() - 50 * 0.25) <= tol


def test_null_scenario_iv_cstat_near_half():
    sc = ScenarioConfig(50, 0.5, 0.0, validation_size=100_000)
    data = gen_dataset(sc, 0)
    iv = independent_validation(fit_ml(data), sc, np.random.default_rng(0))
    assert iv[C] == pytest.approx(0.5, abs=0.01)
    assert set(iv) == {C, SLOPE, BRIER}


# --- runs ----------------------------------------------------------------------------

SMALL = dict(folds=3, repetitions=2, bootstrap_count=8)


def test_record_count_and_bookkeeping():
    sc = ScenarioConfig(50, 0.5, 1.0, n_replicates=3, validation_size=2000)
    methods = ["apparent", "lpo", "kfold", "632plus"]
    run = run_scenario(sc, ("ml", "ridge"), methods, **SMALL)
    assert len(run.records) == 3 * 2 * (len(methods) * 3 - 1)
    assert len(run.validation) == 3 * 2 * 3
    assert len(run.cell("ml", "apparent", "cstat")) == 3
    assert run.cell("ml", "lpo", "brier") == []
    assert len(run.separated) == 3


def test_workers_do_not_change_results():
    sc = ScenarioConfig(50, 0.25, 1.0, n_replicates=8, validation_size=1000)
    args = (("ml", "firth", "ridge"), ["apparent", "loo", "enhboot"])
    one = run_scenario(sc, *args, **SMALL, workers=1)
    eight = run_scenario(sc, *args, **SMALL, workers=8)
    assert one.records == eight.records or _same(one.records, eight.records)
    assert one.validation == eight.validation
    assert one.separated == eight.separated


def _same(a, b):
    return all(
        (x.resampled == y.resampled or (np.isnan(x.resampled) and np.isnan(y.resampled)))
        and x.iv == y.iv and x.method == y.method and x.estimator == y.estimator
        for x, y in zip(a, b)
    ) and len(a) == len(b)


def test_runs_are_repeatable():
    sc = ScenarioConfig(50, 0.25, 0.5, n_replicates=2, validation_size=1000)
    a = run_scenario(sc, ("firth",), ["kfold"], **SMALL)
    b = run_scenario(sc, ("firth",), ["kfold"], **SMALL)
    assert _same(a.records, b.records)


def test_estimator_spec_objects_accepted():
    sc = ScenarioConfig(50, 0.5, 0.0, n_replicates=2, validation_size=500)
    run = run_scenario(sc, (EstimatorSpec(EstimatorKind.ML),), [])
    assert run.records == [] and len(run.iv_values("ml", "brier")) == 2


# --- summaries -------------------------------------------------------------------------

def _records(diffs, iv=0.6, metric=C):
    return [ReplicateRecord(s, "ml", Method.LOO, metric, iv + d, iv) for s, d in enumerate(diffs)]


def test_summary_constant_differences():
    s = summarize(_records([0.03] * 5))
    assert s.mean_diff == pytest.approx(0.03) and s.rmsd == pytest.approx(0.03)
    assert s.mcse_mean == pytest.approx(0.0, abs=1e-15)


def test_summary_hand_example():
    s = summarize_differences([0.1, -0.1], [0.0, 0.0])
    assert s.mean_diff == 0.0 and s.rmsd == pytest.approx(0.1)


def test_jackknife_closed_form_matches_brute_force():
    d = np.array([0.1, -0.1, 0.2])
    s = summarize_differences(d, np.zeros(3))
    brute = jackknife_se(d, lambda v: np.sqrt(np.mean(v**2)))
    assert s.mcse_rmsd == pytest.approx(brute, rel=1e-12)
    d = np.random.default_rng(0).normal(size=40)
    assert summarize_differences(d, np.zeros(40)).mcse_rmsd == pytest.approx(
        jackknife_se(d, lambda v: np.sqrt(np.mean(v**2))), rel=1e-12)


def test_summary_invariants_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        d = rng.normal(rng.normal(), rng.uniform(0.01, 1), size=int(rng.integers(2, 30)))
        s = summarize_differences(d, np.zeros_like(d))
        assert s.rmsd >= abs(s.mean_diff) and s.mcse_mean >= 0 and s.mcse_rmsd >= 0


def test_summary_missing_and_insufficient():
    s = summarize_differences([0.1, np.nan, 0.3], [0.0, 0.0, 0.0])
    assert (s.n_used, s.n_missing) == (2, 1)
    with pytest.raises(InsufficientReplicates):
        summarize_differences([0.1, np.nan], [0.0, 0.0])


def test_winsorized_summary():
    recs = [ReplicateRecord(s, "ml", Method.LOO, C, b, 0.5) for s, b in enumerate([0.3, 0.7, 0.4])]
    w, raw = winsorized_summary(recs), summarize(recs)
    assert w.mean_diff == pytest.approx((0 + 0.2 + 0) / 3)
    assert w.rmsd <= raw.rmsd
    above = _records([0.01, 0.02, 0.05])
    assert winsorized_summary(above) == summarize(above)
    with pytest.raises(ValueError):
        winsorized_summary(_records([0.1, 0.2], metric=BRIER))
