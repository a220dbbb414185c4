"""Apparent and optimism-corrected performance estimates.

Methods: leave-one-out CV (pooled predictions), leave-pair-out CV, repeated
f-fold CV (averaged over folds), the enhanced bootstrap, the .632+ bootstrap
and the simple bootstrap.

Subsets are expressed as weight rows over the original observations and
fitted in one batch (see :func:`logitval.estimators.fit_batch`).  A subset is
discarded, and counted, when its training part has collinear covariates or a
single outcome class, or when the metric needs both classes and its
evaluation part lacks one.  Separated but fittable subsets are kept.

An estimator is either an :class:`~logitval.estimators.EstimatorSpec` or any
object with a ``name`` attribute and a ``predict_batch(data, weights)``
method returning an ``(m, n)`` array of probabilities for all rows of
``data``.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .estimators import (
    CollinearDesign,
    Design,
    EstimatorSpec,
    SingleClassOutcome,
    check_fittable,
    fit_batch,
    rank_deficient_columns,
)
from .exceptions import AllSubsetsDiscarded, BrierNotSupported
from .metrics import MetricKind, batch_scores
from .separation import Separation, detect_separation


class Method(str, enum.Enum):
    APPARENT = "apparent"
    LOO = "loo"
    LPO = "lpo"
    KFOLD = "kfold"
    ENHANCED_BOOT = "enhboot"
    DOT632PLUS = "632plus"
    SIMPLE_BOOT = "simpleboot"


BOOTSTRAP_METHODS = (Method.ENHANCED_BOOT, Method.DOT632PLUS, Method.SIMPLE_BOOT)


class Discard(str, enum.Enum):
    COLLINEAR = "collinear"
    ONE_CLASS_TRAINING = "one-class training"
    ONE_CLASS_EVALUATION = "one-class evaluation"
    EMPTY_EVALUATION = "empty evaluation"
    FIT_FAILED = "fit failed"


@dataclass(frozen=True)
class PolicyDecision:
    ok: bool
    reason: Discard | None = None


@dataclass(frozen=True)
class ResamplePlan:
    method: Method
    folds: int = 5
    repetitions: int = 40
    bootstrap_count: int = 200
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.bootstrap_count < 1:
            raise ValueError("bootstrap_count must be at least 1")


@dataclass(frozen=True)
class AssessmentResult:
    """One corrected estimate.

    ``value`` is NaN when no estimate exists; ``failure`` then says why.
    ``components`` holds per-repetition values for repeated f-fold CV.
    """

    estimator: str
    method: Method
    metric: MetricKind
    value: float
    discarded_subsets: int = 0
    attempted_subsets: int = 0
    discard_reasons: dict = field(default_factory=dict)
    failure: str | None = None
    components: tuple = ()
    separated_subsets: int | None = None


@dataclass(frozen=True)
class Dot632Trace:
    c_app: float
    c_oob: float
    R_hat: float
    w_hat: float
    null_value: float


# --- seeds --------------------------------------------------------------------


def derive_subset_seed(base_seed: int, method_tag: str, index: int) -> int:
    """Child seed for subset ``index`` of ``method_tag`` (64-bit, BLAKE2b)."""
    payload = struct.pack("<Q", base_seed & 0xFFFFFFFFFFFFFFFF) + struct.pack("<q", index)
    digest = hashlib.blake2b(payload, digest_size=8, person=method_tag.encode()[:16].ljust(16, b"\0"))
    return int.from_bytes(digest.digest(), "little")


def _rng(base_seed, tag, index):
    return np.random.default_rng(derive_subset_seed(base_seed, tag, index))


# --- subset policy ----------------------------------------------------------


def subset_policy(fit_subset: Dataset, eval_subset: Dataset | None, metric: MetricKind) -> PolicyDecision:
    """Keep or discard a (training, evaluation) pair of subsets."""
    y = fit_subset.y
    if y.min() == y.max():
        return PolicyDecision(False, Discard.ONE_CLASS_TRAINING)
    if rank_deficient_columns(Design(fit_subset.X).X1).size:
        return PolicyDecision(False, Discard.COLLINEAR)
    if eval_subset is not None and MetricKind(metric).needs_both_classes:
        if eval_subset.y.min() == eval_subset.y.max():
            return PolicyDecision(False, Discard.ONE_CLASS_EVALUATION)
    return PolicyDecision(True)


def _training_status(data: Dataset, W: np.ndarray) -> list:
    """Per weight row: None if fittable, else the Discard reason."""
    y = data.y
    X1 = Design(data.X).X1
    status = []
    events = W @ y
    nonevents = W @ (1.0 - y)
    cache = {}
    for i, row in enumerate(W):
        if events[i] <= 0 or nonevents[i] <= 0:
            status.append(Discard.ONE_CLASS_TRAINING)
            continue
        present = row > 0
        key = present.tobytes()
        if key not in cache:
            cache[key] = rank_deficient_columns(X1[present]).size > 0
        status.append(Discard.COLLINEAR if cache[key] else None)
    return status


def _estimator_name(estimator) -> str:
    return estimator.name


def _predict(estimator, data: Dataset, W: np.ndarray) -> np.ndarray:
    if W.shape[0] == 0:
        return np.zeros((0, data.n))
    if isinstance(estimator, EstimatorSpec):
        return fit_batch(data, estimator, W).probs
    return np.atleast_2d(np.asarray(estimator.predict_batch(data, W), dtype=float))


class _Subsets:
    """Training weight rows, their validity, and probabilities for valid rows."""

    def __init__(self, data, estimator, W, track_separation=False, *, status=None, P=None):
        self.W = W
        if status is None:
            status = _training_status(data, W)
        self.status = list(status)
        valid = np.array([s is None for s in self.status], dtype=bool)
        if P is None:
            P = np.full(W.shape, np.nan)
            if valid.any():
                P[valid] = _predict(estimator, data, W[valid])
        self.P = P
        failed = valid & ~np.all(np.isfinite(self.P), axis=1)
        for i in np.flatnonzero(failed):
            self.status[i] = Discard.FIT_FAILED
        self.valid = valid & ~failed
        self.separated = None
        if track_separation:
            self.separated = sum(
                detect_separation(data.subset(W[i] > 0)) is Separation.SEPARATED
                for i in np.flatnonzero(self.valid)
            )

    @classmethod
    def shared(cls, data, estimator, groups: dict, track_separation=False) -> dict:
        """One batched fit for the weight rows of several methods."""
        names = list(groups)
        W = np.concatenate([groups[k] for k in names]) if names else np.zeros((0, data.n))
        status = _training_status(data, W)
        valid = np.array([s is None for s in status], dtype=bool)
        P = np.full(W.shape, np.nan)
        if valid.any():
            P[valid] = _predict(estimator, data, W[valid])
        out, start = {}, 0
        for k in names:
            stop = start + groups[k].shape[0]
            out[k] = cls(data, estimator, groups[k], track_separation,
                         status=status[start:stop], P=P[start:stop])
            start = stop
        return out


def _result(estimator, method, metric, value, status, attempted, *, failure=None, **extra):
    reasons = Counter(s.value for s in status if s is not None)
    discarded = sum(reasons.values())
    if failure is None and not np.isfinite(value):
        failure = "all subsets discarded" if discarded == attempted else "estimate undefined"
    return AssessmentResult(
        estimator=_estimator_name(estimator),
        method=Method(method),
        metric=MetricKind(metric),
        value=float(value),
        discarded_subsets=discarded,
        attempted_subsets=attempted,
        discard_reasons=dict(sorted(reasons.items())),
        failure=failure,
        **extra,
    )


def _raise_if_failed(result: AssessmentResult) -> AssessmentResult:
    if result.failure is not None:
        raise AllSubsetsDiscarded(
            f"{result.method.value}/{result.metric.value}: {result.failure} "
            f"({result.discarded_subsets} of {result.attempted_subsets} subsets discarded)"
        )
    return result


# --- apparent -----------------------------------------------------------------


def _apparent_probs(data, estimator):
    if isinstance(estimator, EstimatorSpec):
        check_fittable(data)
    return _predict(estimator, data, np.ones((1, data.n)))[0]


def _apparent(data, estimator, metrics, probs=None):
    if probs is None:
        try:
            probs = _apparent_probs(data, estimator)
        except (CollinearDesign, SingleClassOutcome) as exc:
            return {m: _result(estimator, Method.APPARENT, m, np.nan, [], 1, failure=str(exc)) for m in metrics}
    out = {}
    for m in metrics:
        value = batch_scores(m, probs[None, :], data.y, np.ones((1, data.n)))[0]
        out[m] = _result(estimator, Method.APPARENT, m, value, [], 1)
    return out


def apparent(data: Dataset, estimator, metric: MetricKind) -> AssessmentResult:
    """Fit on all data and score on the same data."""
    metric = MetricKind(metric)
    probs = _apparent_probs(data, estimator)
    return _raise_if_failed(_apparent(data, estimator, [metric], probs)[metric])


# --- leave-one-out ------------------------------------------------------------


def _loo_rows(data):
    return 1.0 - np.eye(data.n)


def _loo(data, estimator, metrics, track_separation=False, subsets=None):
    n = data.n
    if subsets is None:
        subsets = _Subsets(data, estimator, _loo_rows(data), track_separation)
    idx = np.flatnonzero(subsets.valid)
    pooled = subsets.P[idx, idx]
    out = {}
    for m in metrics:
        if idx.size == 0:
            value = np.nan
        else:
            value = batch_scores(m, pooled[None, :], data.y[idx], np.ones((1, idx.size)))[0]
        out[m] = _result(estimator, Method.LOO, m, value, subsets.status, n,
                         separated_subsets=subsets.separated)
    return out


def loo_cv(data: Dataset, estimator, metric: MetricKind) -> AssessmentResult:
    """Leave-one-out CV: one metric computed on the n pooled left-out predictions.

    For the Brier score pooling and averaging coincide.
    """
    if data.n < 3:
        raise ValueError("leave-one-out CV needs at least 3 observations")
    metric = MetricKind(metric)
    return _raise_if_failed(_loo(data, estimator, [metric])[metric])


# --- leave-pair-out -----------------------------------------------------------


def _lpo_rows(data):
    """Training rows for every event/non-event pair, with the pair indices."""
    events = np.flatnonzero(data.y == 1)
    nonevents = np.flatnonzero(data.y == 0)
    ei, ni = (g.ravel() for g in np.meshgrid(events, nonevents, indexing="ij"))
    rows = np.arange(ei.size)
    W = np.ones((ei.size, data.n))
    W[rows, ei] = 0.0
    W[rows, ni] = 0.0
    return W, ei, ni


def _lpo(data, estimator, metrics, track_separation=False, subsets=None):
    metrics = list(metrics)
    if MetricKind.BRIER_SCORE in metrics:
        raise BrierNotSupported("leave-pair-out CV is not defined for the Brier score")
    W, ei, ni = _lpo_rows(data)
    rows = np.arange(ei.size)
    if subsets is None:
        subsets = _Subsets(data, estimator, W, track_separation)
    ok = subsets.valid
    pe = subsets.P[rows, ei][ok]
    pn = subsets.P[rows, ni][ok]
    out = {}
    for m in metrics:
        if not ok.any():
            value = np.nan
        elif m is MetricKind.C_STATISTIC:
            value = float(np.mean((pe > pn) + 0.5 * (pe == pn)))
        else:
            value = float(np.mean(pe - pn))
        out[m] = _result(estimator, Method.LPO, m, value, subsets.status, ei.size,
                         separated_subsets=subsets.separated)
    return out


def lpo_cv(data: Dataset, estimator, metric: MetricKind) -> AssessmentResult:
    """Leave-pair-out CV over all k(n-k) event/non-event pairs."""
    metric = MetricKind(metric)
    return _raise_if_failed(_lpo(data, estimator, [metric])[metric])


# --- repeated f-fold ------------------------------------------------------------


def fold_assignments(n: int, folds: int, repetitions: int, seed: int) -> list[list[np.ndarray]]:
    """Random partitions of ``range(n)`` into near-equal folds, one per repetition."""
    return [
        np.array_split(_rng(seed, "kfold", r).permutation(n), folds) for r in range(repetitions)
    ]


def _kfold_rows(data, folds, repetitions, seed):
    """Left-out indicator rows, one per fold and repetition."""
    n = data.n
    if folds > n:
        raise ValueError(f"cannot split {n} observations into {folds} folds")
    E = np.zeros((folds * repetitions, n))
    for r, parts in enumerate(fold_assignments(n, folds, repetitions, seed)):
        for f, part in enumerate(parts):
            E[r * folds + f, part] = 1.0
    return E


def _kfold(data, estimator, metrics, folds, repetitions, seed, track_separation=False, subsets=None):
    E = _kfold_rows(data, folds, repetitions, seed)
    if subsets is None:
        subsets = _Subsets(data, estimator, 1.0 - E, track_separation)
    out = {}
    for m in metrics:
        scores = np.full(E.shape[0], np.nan)
        if subsets.valid.any():
            scores[subsets.valid] = batch_scores(m, subsets.P[subsets.valid], data.y, E[subsets.valid])
        status = list(subsets.status)
        for i in np.flatnonzero(subsets.valid & np.isnan(scores)):
            status[i] = Discard.ONE_CLASS_EVALUATION
        per_rep = scores.reshape(repetitions, folds)
        reps = [float(np.mean(row[~np.isnan(row)])) for row in per_rep if (~np.isnan(row)).any()]
        value = float(np.mean(reps)) if reps else np.nan
        out[m] = _result(estimator, Method.KFOLD, m, value, status, E.shape[0],
                         components=tuple(reps), separated_subsets=subsets.separated)
    return out


def kfold_cv(data: Dataset, estimator, metric: MetricKind, folds: int = 5,
             repetitions: int = 40, seed: int = 0) -> AssessmentResult:
    """Repeated f-fold CV: metric per left-out fold, averaged within and across repetitions."""
    metric = MetricKind(metric)
    return _raise_if_failed(_kfold(data, estimator, [metric], folds, repetitions, seed)[metric])


# --- bootstrap ------------------------------------------------------------------


def bootstrap_counts(n: int, B: int, seed: int) -> np.ndarray:
    """Multiplicity of each observation in ``B`` resamples of size ``n``, shape ``(B, n)``."""
    return np.stack([
        np.bincount(_rng(seed, "bootstrap", b).integers(0, n, n), minlength=n) for b in range(B)
    ]).astype(float)


def dot632plus_combine(apparent_value: float, oob_value: float, null_value: float,
                       higher_is_better: bool = True) -> tuple[float, Dot632Trace]:
    """Combine apparent and out-of-bag values into the .632+ estimate.

    The out-of-bag value is floored at the no-information value, and the
    relative overfitting rate is set to 0 when the out-of-bag value beats the
    apparent one or the apparent value does not beat the no-information value.
    For lower-is-better metrics the comparisons are mirrored.
    """
    s = 1.0 if higher_is_better else -1.0
    app, oob, null = s * apparent_value, s * oob_value, s * null_value
    if oob < null:
        oob = null
    if oob > app or null >= app:
        R = 0.0
    else:
        R = (app - oob) / (app - null)
    w = 0.632 / (1.0 - 0.368 * R)
    value = (1.0 - w) * app + w * oob
    return s * value, Dot632Trace(apparent_value, s * oob, R, w, null_value)


def brier_null_value(probs: np.ndarray, y: np.ndarray) -> float:
    """No-information Brier score, the mean of (y_i - p_j)^2 over all i, j."""
    return float(np.mean(y) - 2.0 * np.mean(y) * np.mean(probs) + np.mean(probs**2))


def _bootstrap(data, estimator, metrics, methods, B, seed, app_probs=None, track_separation=False,
               subsets=None):
    if app_probs is None:
        app_probs = _apparent_probs(data, estimator)
    counts = bootstrap_counts(data.n, B, seed)
    if subsets is None:
        subsets = _Subsets(data, estimator, counts, track_separation)
    ok = subsets.valid
    P = subsets.P[ok]
    ones = np.ones((1, data.n))
    out = {}
    traces = {}
    for m in metrics:
        app = batch_scores(m, app_probs[None, :], data.y, ones)[0]
        m_boot = batch_scores(m, P, data.y, counts[ok])
        m_orig = batch_scores(m, P, data.y, ones)
        for method in methods:
            status = subsets.status
            extra = {"separated_subsets": subsets.separated}
            if method is Method.ENHANCED_BOOT:
                value = app - (np.mean(m_boot) - np.mean(m_orig)) if ok.any() else np.nan
            elif method is Method.SIMPLE_BOOT:
                value = np.mean(m_orig) if ok.any() else np.nan
            else:
                oob_w = (counts[ok] == 0).astype(float)
                oob = batch_scores(m, P, data.y, oob_w)
                status = list(status)
                ok_rows = np.flatnonzero(ok)
                oob_size = oob_w.sum(axis=1)
                for j in np.flatnonzero(np.isnan(oob)):
                    status[ok_rows[j]] = (Discard.EMPTY_EVALUATION if oob_size[j] == 0
                                          else Discard.ONE_CLASS_EVALUATION)
                good = ~np.isnan(oob)
                if good.any() and np.isfinite(app):
                    null = m.null_value if m.null_value is not None else brier_null_value(app_probs, data.y)
                    value, trace = dot632plus_combine(app, float(np.mean(oob[good])), null, m.higher_is_better)
                    traces[m] = trace
                else:
                    value = np.nan
            out[(method, m)] = _result(estimator, method, m, value, status, B, **extra)
    return out, traces


def enhanced_bootstrap(data: Dataset, estimator, metric: MetricKind, B: int = 200,
                       seed: int = 0) -> AssessmentResult:
    """Apparent value minus the bootstrap estimate of optimism (no clamping)."""
    metric = MetricKind(metric)
    out, _ = _bootstrap(data, estimator, [metric], [Method.ENHANCED_BOOT], B, seed)
    return _raise_if_failed(out[(Method.ENHANCED_BOOT, metric)])


def dot632plus(data: Dataset, estimator, metric: MetricKind, B: int = 200,
               seed: int = 0) -> tuple[AssessmentResult, Dot632Trace]:
    metric = MetricKind(metric)
    out, traces = _bootstrap(data, estimator, [metric], [Method.DOT632PLUS], B, seed)
    return _raise_if_failed(out[(Method.DOT632PLUS, metric)]), traces[metric]


def simple_bootstrap(data: Dataset, estimator, metric: MetricKind, B: int = 200,
                     seed: int = 0) -> AssessmentResult:
    """Average performance on the original data of models fitted to resamples."""
    metric = MetricKind(metric)
    out, _ = _bootstrap(data, estimator, [metric], [Method.SIMPLE_BOOT], B, seed)
    return _raise_if_failed(out[(Method.SIMPLE_BOOT, metric)])


# --- everything at once -----------------------------------------------------------


def assess(data: Dataset, estimator, methods, metrics, *, folds: int = 5, repetitions: int = 40,
           bootstrap_count: int = 200, seed: int = 0, track_separation: bool = False,
           ) -> list[AssessmentResult]:
    """Run several methods and metrics, sharing fits where possible.

    The three bootstrap methods use the same resamples.  Failures are
    returned as results with NaN value and a ``failure`` message; the
    leave-pair-out/Brier combination is skipped.  Results are ordered by
    method, then metric, as given.
    """
    methods = [Method(m) for m in methods]
    metrics = [MetricKind(m) for m in metrics]
    lpo_metrics = [m for m in metrics if m is not MetricKind.BRIER_SCORE]
    boot = [m for m in BOOTSTRAP_METHODS if m in methods]
    fittable = True
    if isinstance(estimator, EstimatorSpec):
        try:
            check_fittable(data)
        except (CollinearDesign, SingleClassOutcome):
            fittable = False

    # every training set of every method goes through one batched fit
    groups = {}
    if fittable:
        groups["apparent"] = np.ones((1, data.n))
    if Method.LOO in methods:
        groups["loo"] = _loo_rows(data)
    if Method.LPO in methods and lpo_metrics:
        groups["lpo"] = _lpo_rows(data)[0]
    if Method.KFOLD in methods:
        groups["kfold"] = 1.0 - _kfold_rows(data, folds, repetitions, seed)
    if boot and fittable:
        groups["boot"] = bootstrap_counts(data.n, bootstrap_count, seed)
    subsets = _Subsets.shared(data, estimator, groups, track_separation)
    app_probs = subsets["apparent"].P[0] if fittable else None

    found = {}
    if Method.APPARENT in methods:
        for m, res in _apparent(data, estimator, metrics, app_probs).items():
            found[(Method.APPARENT, m)] = res
    if Method.LOO in methods:
        for m, res in _loo(data, estimator, metrics, subsets=subsets["loo"]).items():
            found[(Method.LOO, m)] = res
    if "lpo" in groups:
        for m, res in _lpo(data, estimator, lpo_metrics, subsets=subsets["lpo"]).items():
            found[(Method.LPO, m)] = res
    if Method.KFOLD in methods:
        for m, res in _kfold(data, estimator, metrics, folds, repetitions, seed,
                             subsets=subsets["kfold"]).items():
            found[(Method.KFOLD, m)] = res
    if boot:
        if app_probs is None:
            for meth in boot:
                for m in metrics:
                    found[(meth, m)] = _result(estimator, meth, m, np.nan, [], bootstrap_count,
                                               failure="model cannot be fitted to the full data")
        else:
            res, _ = _bootstrap(data, estimator, metrics, boot, bootstrap_count, seed, app_probs,
                                subsets=subsets["boot"])
            found.update(res)
    return [found[(meth, m)] for meth in methods for m in metrics if (meth, m) in found]
