"""Discrimination and accuracy measures for predicted event probabilities.

Every function accepts optional non-negative observation weights.  Integer
weights are frequency weights, so a bootstrap resample can be scored from
its multiplicity vector without materializing the duplicated rows; a 0/1
weight vector selects a subset (a left-out fold, the out-of-bag rows).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateOutcome


class MetricKind(str, enum.Enum):
    C_STATISTIC = "cstat"
    DISCRIMINATION_SLOPE = "dslope"
    BRIER_SCORE = "brier"

    @property
    def needs_both_classes(self) -> bool:
        return self is not MetricKind.BRIER_SCORE

    @property
    def higher_is_better(self) -> bool:
        return self is not MetricKind.BRIER_SCORE

    @property
    def null_value(self) -> float | None:
        """Value of a model without discrimination (None for Brier, data dependent)."""
        return {MetricKind.C_STATISTIC: 0.5, MetricKind.DISCRIMINATION_SLOPE: 0.0}.get(self)


@dataclass(frozen=True)
class MetricValue:
    kind: MetricKind
    value: float
    n_events: int
    n_nonevents: int


@dataclass(frozen=True)
class PredictionSet:
    probs: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        outcomes = np.asarray(self.outcomes, dtype=float)
        if probs.shape != outcomes.shape or probs.ndim != 1:
            raise ValueError("probs and outcomes must be vectors of equal length")
        if np.any((probs < 0) | (probs > 1)) or np.any(np.isnan(probs)):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all((outcomes == 0) | (outcomes == 1)):
            raise ValueError("outcomes must be 0 or 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "outcomes", outcomes)


def _prepare(probs, outcomes, weights):
    p = np.asarray(probs, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    w = np.ones_like(p) if weights is None else np.asarray(weights, dtype=float)
    if not (p.shape == y.shape == w.shape) or p.ndim != 1:
        raise ValueError("probs, outcomes and weights must be vectors of equal length")
    return p, y, w


def _class_weights(y, w):
    return float(np.sum(w * y)), float(np.sum(w * (1.0 - y)))


def _cstat(p, y, w) -> float:
    # Mann-Whitney count over tie groups; exact for integer weights.
    uniq, inv = np.unique(p, return_inverse=True)
    ev = np.bincount(inv, weights=w * y, minlength=uniq.size)
    ne = np.bincount(inv, weights=w * (1.0 - y), minlength=uniq.size)
    below = np.cumsum(ne) - ne
    return float(np.sum(ev * (below + 0.5 * ne)) / (ev.sum() * ne.sum()))


def c_statistic(probs, outcomes, weights=None) -> float:
    """Proportion of event/non-event pairs ranked correctly; ties count one half."""
    p, y, w = _prepare(probs, outcomes, weights)
    ev, ne = _class_weights(y, w)
    if ev <= 0 or ne <= 0:
        raise DegenerateOutcome("c-statistic needs at least one event and one non-event")
    return _cstat(p, y, w)


def discrimination_slope(probs, outcomes, weights=None) -> float:
    """Mean probability among events minus mean probability among non-events."""
    p, y, w = _prepare(probs, outcomes, weights)
    ev, ne = _class_weights(y, w)
    if ev <= 0 or ne <= 0:
        raise DegenerateOutcome("discrimination slope needs both outcome classes")
    return float(np.sum(w * y * p) / ev - np.sum(w * (1.0 - y) * p) / ne)


def brier_score(probs, outcomes, weights=None) -> float:
    p, y, w = _prepare(probs, outcomes, weights)
    total = w.sum()
    if p.size == 0 or total <= 0:
        raise ValueError("Brier score of an empty prediction set")
    return float(np.sum(w * (y - p) ** 2) / total)


_FUNCTIONS = {
    MetricKind.C_STATISTIC: c_statistic,
    MetricKind.DISCRIMINATION_SLOPE: discrimination_slope,
    MetricKind.BRIER_SCORE: brier_score,
}


def score(kind: MetricKind, probs, outcomes, weights=None) -> float:
    return _FUNCTIONS[MetricKind(kind)](probs, outcomes, weights)


def evaluate(kind: MetricKind, preds: PredictionSet) -> MetricValue:
    kind = MetricKind(kind)
    k = int(preds.outcomes.sum())
    return MetricValue(kind, score(kind, preds.probs, preds.outcomes), k, preds.outcomes.size - k)


def winsorize_cstat(value):
    """Floor c-statistics at 0.5."""
    if np.ndim(value) == 0:
        return max(float(value), 0.5)
    return np.maximum(np.asarray(value, dtype=float), 0.5)


def batch_scores(kind: MetricKind, P: np.ndarray, y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Score each row of ``P`` against ``y`` under weight row ``W``.

    Rows where the metric is undefined (one class, or no weight at all) give NaN.
    """
    kind = MetricKind(kind)
    P = np.atleast_2d(P)
    W = np.broadcast_to(W, P.shape)
    y = np.asarray(y, dtype=float)
    ev = W @ y
    ne = W @ (1.0 - y)
    with np.errstate(invalid="ignore", divide="ignore"):
        if kind is MetricKind.BRIER_SCORE:
            out = np.sum(W * (y - P) ** 2, axis=1) / (ev + ne)
            out[~(ev + ne > 0)] = np.nan
            return out
        ok = (ev > 0) & (ne > 0)
        if kind is MetricKind.DISCRIMINATION_SLOPE:
            out = (W * P) @ y / ev - (W * P) @ (1.0 - y) / ne
        else:
            out = np.full(P.shape[0], np.nan)
            for i in np.flatnonzero(ok):
                out[i] = _cstat(P[i], y, W[i])
    out[~ok] = np.nan
    return out
