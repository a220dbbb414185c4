"""Factorial Monte Carlo study of resampling-based performance estimates.

Twelve scenarios cross sample size (50, 100), marginal event rate (0.25,
0.5) and effect size (none, weak, strong).  Each replicate draws a dataset,
fits every estimator, computes the apparent and resampling-based measures,
and scores the fitted models on a large independent validation set.
Differences between resampled and validated values are summarized by mean,
root mean square and Monte Carlo standard errors.
"""

from __future__ import annotations

import functools
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import expit

from .dataset import Dataset
from .estimators import EstimatorKind, EstimatorSpec, fit_batch
from .exceptions import InsufficientReplicates
from .metrics import MetricKind, brier_score, c_statistic, discrimination_slope, winsorize_cstat
from .resampling import Method, assess, derive_subset_seed
from .separation import Separation, detect_separation

STRONG_EFFECTS = (0.69, -0.345, -0.0363, 0.0031, -0.0039)
COVARIATE_NAMES = ("x1", "x2", "x3", "x4", "x5")

# latent normal correlations; all other pairs are uncorrelated
_CORRELATIONS = {(0, 2): 0.8, (1, 3): -0.5, (1, 4): -0.3, (3, 4): 0.5}


def _correlation_matrix() -> np.ndarray:
    R = np.eye(5)
    for (i, j), r in _CORRELATIONS.items():
        R[i, j] = R[j, i] = r
    return R


_CHOLESKY = np.linalg.cholesky(_correlation_matrix())

SAMPLE_SIZES = (50, 100)
EVENT_RATES = (0.25, 0.5)
EFFECT_SIZES = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    event_rate: float
    effect_multiplier: float
    n_replicates: int = 1000
    validation_size: int = 100_000
    base_seed: int = 20200101

    def __post_init__(self):
        if self.n < 1 or self.n_replicates < 1 or self.validation_size < 1:
            raise ValueError("n, n_replicates and validation_size must be positive")
        if not 0.0 < self.event_rate < 1.0:
            raise ValueError("event_rate must lie in (0, 1)")
        if not 0.0 <= self.effect_multiplier <= 1.0:
            raise ValueError("effect_multiplier must lie in [0, 1]")

    @property
    def label(self) -> str:
        return f"n={self.n},rate={self.event_rate:g},effect={self.effect_multiplier:g}"


def all_scenarios(**kwargs) -> list[ScenarioConfig]:
    return [
        ScenarioConfig(n, rate, effect, **kwargs)
        for n, rate, effect in itertools.product(SAMPLE_SIZES, EVENT_RATES, EFFECT_SIZES)
    ]


@dataclass(frozen=True)
class ScenarioCoefficients:
    beta0: float
    slopes: tuple[float, ...]

    @property
    def beta(self) -> np.ndarray:
        return np.array((self.beta0,) + tuple(self.slopes))


# --- data generation --------------------------------------------------------------


def _winsorize_upper(x: np.ndarray) -> np.ndarray:
    """Cap each column of the last two axes at Q3 + 5 IQR (linear quantiles)."""
    q1, q3 = np.percentile(x, [25, 75], axis=-2, keepdims=True)
    return np.minimum(x, q3 + 5.0 * (q3 - q1))


def _transform(z: np.ndarray) -> np.ndarray:
    x = np.empty_like(z)
    x[..., 0] = z[..., 0] < 0.6
    x[..., 1] = (z[..., 1] >= -1.2).astype(float) + (z[..., 1] >= 0.75)
    x[..., 2] = np.trunc(10.0 * z[..., 2] + 55.0)
    x[..., 3] = np.trunc(np.maximum(0.0, 100.0 * np.exp(z[..., 3]) - 20.0))
    x[..., 4] = np.trunc(np.maximum(0.0, 80.0 * np.exp(z[..., 4]) - 20.0))
    x[..., 2:] = _winsorize_upper(x[..., 2:])
    return x


def gen_covariates(n: int, rng: np.random.Generator, blocks: int | None = None) -> np.ndarray:
    """One binary, one ordinal and three continuous covariates, shape ``(n, 5)``.

    With ``blocks`` the result has shape ``(blocks, n, 5)`` and each block is
    winsorized separately, as if it were its own dataset.
    """
    shape = (n, 5) if blocks is None else (blocks, n, 5)
    z = rng.standard_normal(shape) @ _CHOLESKY.T
    return _transform(z)


def scenario_slopes(effect_multiplier: float) -> tuple[float, ...]:
    return tuple(effect_multiplier * b for b in STRONG_EFFECTS)


def calibrate_intercept(slopes, target_rate: float, rng: np.random.Generator,
                        n_draws: int = 1_000_000, block_size: int = 100) -> float:
    """Intercept giving marginal event rate ``target_rate``, by bisection.

    The marginal rate is a Monte Carlo average of the event probability over
    ``n_draws`` covariate vectors, generated in datasets of ``block_size``.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie in (0, 1)")
    slopes = np.asarray(slopes, dtype=float)
    logit = np.log(target_rate / (1.0 - target_rate))
    if not np.any(slopes):
        return float(logit)
    blocks = max(1, n_draws // block_size)
    lin = (gen_covariates(block_size, rng, blocks=blocks) @ slopes).ravel()

    def excess(b0):
        return float(np.mean(expit(b0 + lin))) - target_rate

    lo, hi = logit - 10.0, logit + 10.0
    return float(bisect(excess, lo, hi, xtol=1e-10))


@functools.lru_cache(maxsize=None)
def _coefficients(n, event_rate, effect, seed) -> ScenarioCoefficients:
    slopes = scenario_slopes(effect)
    rng = np.random.default_rng(derive_subset_seed(seed, "calibration", 0))
    return ScenarioCoefficients(calibrate_intercept(slopes, event_rate, rng, block_size=n), slopes)


def scenario_coefficients(scenario: ScenarioConfig) -> ScenarioCoefficients:
    """Calibrated coefficients, cached per scenario."""
    return _coefficients(scenario.n, scenario.event_rate, scenario.effect_multiplier, scenario.base_seed)


def _stream(scenario: ScenarioConfig, purpose: str, index: int) -> np.random.Generator:
    tag = f"{purpose}:{scenario.label}"
    return np.random.default_rng(derive_subset_seed(scenario.base_seed, tag, index))


def _draw(n, coefs, rng) -> Dataset:
    X = gen_covariates(n, rng)
    pi = expit(coefs.beta0 + X @ np.asarray(coefs.slopes))
    y = (rng.random(n) < pi).astype(float)
    return Dataset(y, X, COVARIATE_NAMES)


def gen_dataset(scenario: ScenarioConfig, replicate_index: int,
                coefs: ScenarioCoefficients | None = None) -> Dataset:
    coefs = coefs or scenario_coefficients(scenario)
    return _draw(scenario.n, coefs, _stream(scenario, "data", replicate_index))


def gen_validation_set(scenario: ScenarioConfig, replicate_index: int,
                       coefs: ScenarioCoefficients | None = None) -> Dataset:
    coefs = coefs or scenario_coefficients(scenario)
    return _draw(scenario.validation_size, coefs, _stream(scenario, "validation", replicate_index))


def _validate_probs(probs, y) -> dict:
    return {
        MetricKind.C_STATISTIC: c_statistic(probs, y),
        MetricKind.DISCRIMINATION_SLOPE: discrimination_slope(probs, y),
        MetricKind.BRIER_SCORE: brier_score(probs, y),
    }


def independent_validation(model, scenario: ScenarioConfig | None = None,
                           rng: np.random.Generator | None = None,
                           validation: Dataset | None = None) -> dict:
    """All three measures of ``model`` on a fresh validation set.

    Pass ``validation`` to reuse a set, otherwise one of
    ``scenario.validation_size`` observations is drawn from ``rng``.
    """
    if validation is None:
        validation = _draw(scenario.validation_size, scenario_coefficients(scenario), rng)
    return _validate_probs(model.predict(validation.X), validation.y)


# --- running ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    estimator: str
    method: Method
    metric: MetricKind
    resampled: float
    iv: float
    discarded: int = 0
    attempted: int = 0
    separated_full: bool = False
    separated_subsets: int | None = None
    failure: str | None = None


@dataclass(frozen=True)
class ValidationRecord:
    replicate: int
    estimator: str
    metric: MetricKind
    value: float


@dataclass
class ScenarioRun:
    scenario: ScenarioConfig
    records: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    separated: list = field(default_factory=list)

    def cell(self, estimator, method, metric) -> list:
        method, metric = Method(method), MetricKind(metric)
        return [r for r in self.records
                if r.estimator == estimator and r.method is method and r.metric is metric]

    def iv_values(self, estimator, metric) -> np.ndarray:
        metric = MetricKind(metric)
        return np.array([v.value for v in self.validation
                         if v.estimator == estimator and v.metric is metric])

    @property
    def separation_rate(self) -> float:
        return float(np.mean(self.separated))


@dataclass(frozen=True)
class _Job:
    scenario: ScenarioConfig
    coefs: ScenarioCoefficients
    estimators: tuple
    methods: tuple
    metrics: tuple
    folds: int
    repetitions: int
    bootstrap_count: int
    track_separation: bool


def _run_replicate(job: _Job, s: int):
    scenario = job.scenario
    data = gen_dataset(scenario, s, job.coefs)
    separated = detect_separation(data) is Separation.SEPARATED
    validation = gen_validation_set(scenario, s, job.coefs)
    resample_seed = derive_subset_seed(scenario.base_seed, f"resample:{scenario.label}", s)
    records, iv_records = [], []
    ones = np.ones((1, data.n))
    for spec in job.estimators:
        batch = fit_batch(data, spec, ones)
        beta = batch.beta[0]
        iv = _validate_probs(expit(beta[0] + validation.X @ beta[1:]), validation.y)
        iv_records.extend(ValidationRecord(s, spec.name, m, iv[m]) for m in MetricKind)
        if not job.methods:
            continue
        results = assess(data, spec, job.methods, job.metrics, folds=job.folds,
                         repetitions=job.repetitions, bootstrap_count=job.bootstrap_count,
                         seed=resample_seed, track_separation=job.track_separation)
        for r in results:
            records.append(ReplicateRecord(
                replicate=s, estimator=spec.name, method=r.method, metric=r.metric,
                resampled=r.value, iv=iv[r.metric], discarded=r.discarded_subsets,
                attempted=r.attempted_subsets, separated_full=separated,
                separated_subsets=r.separated_subsets, failure=r.failure,
            ))
    return s, separated, records, iv_records


def _run_chunk(job, indices):
    return [_run_replicate(job, s) for s in indices]


def run_scenario(scenario: ScenarioConfig, estimators=("ml", "firth", "ridge"), methods=(),
                 metrics=tuple(MetricKind), *, folds: int = 5, repetitions: int = 40,
                 bootstrap_count: int = 200, workers: int = 1, replicates=None,
                 track_separation: bool = False) -> ScenarioRun:
    """Simulate ``scenario`` and return per-replicate records.

    ``methods`` may be empty, in which case only validated values are
    produced.  ``replicates`` optionally restricts the replicate indices.
    Results do not depend on ``workers``: every replicate draws from its own
    derived seed and records are ordered by replicate index.
    """
    specs = tuple(e if isinstance(e, EstimatorSpec) else EstimatorSpec(EstimatorKind(e)) for e in estimators)
    job = _Job(scenario, scenario_coefficients(scenario), specs, tuple(Method(m) for m in methods),
               tuple(MetricKind(m) for m in metrics), folds, repetitions, bootstrap_count,
               track_separation)
    indices = list(range(scenario.n_replicates)) if replicates is None else list(replicates)
    if workers <= 1:
        outputs = _run_chunk(job, indices)
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = [o for part in pool.map(_run_chunk, [job] * workers, chunks) for o in part]
    outputs.sort(key=lambda o: o[0])
    run = ScenarioRun(scenario)
    for _, separated, records, iv_records in outputs:
        run.separated.append(separated)
        run.records.extend(records)
        run.validation.extend(iv_records)
    return run


# --- summaries ---------------------------------------------------------------------


@dataclass(frozen=True)
class PerformanceSummary:
    mean_diff: float
    rmsd: float
    mcse_mean: float
    mcse_rmsd: float
    n_used: int
    n_missing: int = 0


def _rmsd(d: np.ndarray) -> float:
    return float(np.sqrt(np.mean(d**2)))


def jackknife_se(values: np.ndarray, statistic) -> float:
    """Delete-one jackknife standard error of ``statistic(values)``."""
    values = np.asarray(values, dtype=float)
    S = values.size
    loo = np.array([statistic(np.delete(values, i)) for i in range(S)])
    return float(np.sqrt((S - 1) / S * np.sum((loo - loo.mean()) ** 2)))


def _rmsd_jackknife_se(d: np.ndarray) -> float:
    # closed form of the delete-one RMSDs, same result as jackknife_se(d, _rmsd)
    S = d.size
    loo = np.sqrt((np.sum(d**2) - d**2) / (S - 1))
    return float(np.sqrt((S - 1) / S * np.sum((loo - loo.mean()) ** 2)))


def summarize_differences(resampled, validated) -> PerformanceSummary:
    b = np.asarray(resampled, dtype=float)
    B = np.asarray(validated, dtype=float)
    keep = np.isfinite(b) & np.isfinite(B)
    d = b[keep] - B[keep]
    S = d.size
    if S < 2:
        raise InsufficientReplicates(f"need at least 2 usable replicates, have {S}")
    return PerformanceSummary(
        mean_diff=float(d.mean()),
        rmsd=_rmsd(d),
        mcse_mean=float(np.sqrt(np.sum((d - d.mean()) ** 2) / (S * (S - 1)))),
        mcse_rmsd=_rmsd_jackknife_se(d),
        n_used=S,
        n_missing=int(b.size - S),
    )


def summarize(records) -> PerformanceSummary:
    """Mean and root mean squared difference of resampled minus validated values."""
    return summarize_differences([r.resampled for r in records], [r.iv for r in records])


def winsorized_summary(records) -> PerformanceSummary:
    """As :func:`summarize`, with resampled c-statistics floored at 0.5 first."""
    records = list(records)
    if any(r.metric is not MetricKind.C_STATISTIC for r in records):
        raise ValueError("winsorized summaries apply to c-statistics only")
    b = np.array([r.resampled for r in records])
    b = np.where(np.isfinite(b), winsorize_cstat(np.nan_to_num(b, nan=0.5)), np.nan)
    return summarize_differences(b, [r.iv for r in records])
