"""Logistic regression by maximum likelihood, Firth's penalized likelihood and ridge.

All three estimators share one Newton solver that works on a *batch* of
problems at once.  A batch is a set of observation-weight vectors over the
rows of one dataset (bootstrap multiplicities, cross-validation masks, ...),
so that hundreds of resampled fits cost a handful of matrix products per
iteration.  The single-fit functions (:func:`fit_ml`, :func:`fit_firth`,
:func:`fit_ridge_fixed`, :func:`fit_ridge`) are batches of size one.

Covariates are standardized internally (zero mean, unit sample standard
deviation).  Coefficients are reported on the original covariate scale.
For ridge the penalty acts on the standardized slopes of the data being
fitted; the intercept is never penalized.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg
from scipy.special import expit

from .dataset import Dataset
from .exceptions import (
    CollinearDesign,
    DimensionMismatch,
    SingleClassOutcome,
    SingularInformation,
    SingularPenalizedHessian,
)
from .separation import Separation, detect_separation

PIVOT_TOLERANCE = 1e-12
# relative slack when comparing objectives during step-halving (rounding noise)
_OBJECTIVE_SLACK = 1e-12
# upper bound on (problems x observations) held in memory per Newton batch
_CHUNK_CELLS = 2_000_000


class EstimatorKind(str, enum.Enum):
    ML = "ml"
    FIRTH = "firth"
    RIDGE = "ridge"


def default_lambda_grid(n: float) -> np.ndarray:
    """Zero followed by 96 log-equidistant penalties from ``1e-4 n`` to ``1e4 n``."""
    return np.concatenate([[0.0], np.logspace(-4.0, 4.0, 96) * n])


@dataclass(frozen=True)
class EstimatorSpec:
    """How to fit a logistic model.

    ``lambda_grid`` applies to ridge only.  When it is None the grid is
    :func:`default_lambda_grid` evaluated at the size of the data being
    fitted, so resampled subsets get their own grid.
    """

    kind: EstimatorKind
    max_iterations: int = 25
    convergence_tolerance: float = 1e-8
    lambda_grid: tuple[float, ...] | None = None
    max_halvings: int = 5

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.convergence_tolerance > 0:
            raise ValueError("convergence_tolerance must be positive")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be non-negative")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid or grid[0] != 0.0:
                raise ValueError("lambda_grid must start with 0")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda_grid must be strictly increasing")
            object.__setattr__(self, "lambda_grid", grid)

    @property
    def name(self) -> str:
        return self.kind.value

    def grid_for(self, n_fit: np.ndarray) -> np.ndarray:
        """Penalty grid per problem, shape ``(len(n_fit), L)``."""
        n_fit = np.atleast_1d(np.asarray(n_fit, dtype=float))
        if self.lambda_grid is not None:
            return np.tile(np.asarray(self.lambda_grid), (n_fit.size, 1))
        return default_lambda_grid(1.0)[None, :] * n_fit[:, None]


@dataclass(frozen=True)
class FittedModel:
    """A fitted logistic model on the original covariate scale.

    ``beta[0]`` is the intercept.  ``lam`` is None except for ridge fits;
    ``df_e`` equals ``p + 1`` for ML and Firth.
    """

    kind: EstimatorKind
    beta: np.ndarray
    converged: bool
    separation_detected: bool
    loglik: float
    df_e: float
    lam: float | None = None
    n_iter: int = 0

    def predict(self, X) -> np.ndarray:
        return predict_probs(self, X)


@dataclass(frozen=True)
class FisherComponents:
    info: np.ndarray
    hat_diagonals: np.ndarray


class Design:
    """Intercept-augmented, standardized design matrix of one dataset."""

    def __init__(self, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        n, p = X.shape
        self.center = X.mean(axis=0)
        scale = X.std(axis=0, ddof=1) if n > 1 else np.ones(p)
        scale[~(scale > 0)] = 1.0
        self.scale = scale
        self.X1 = np.column_stack([np.ones(n), (X - self.center) / scale])
        d = p + 1
        self.d = d
        self.outer = (self.X1[:, :, None] * self.X1[:, None, :]).reshape(n, d * d)

    def to_original(self, gamma: np.ndarray) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        slopes = gamma[..., 1:] / self.scale
        intercept = gamma[..., 0] - slopes @ self.center
        return np.concatenate([intercept[..., None], slopes], axis=-1)

    def from_original(self, beta: np.ndarray) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        slopes = beta[..., 1:] * self.scale
        intercept = beta[..., 0] + beta[..., 1:] @ self.center
        return np.concatenate([intercept[..., None], slopes], axis=-1)

    def subset_scale_ratios(self, weights: np.ndarray) -> np.ndarray:
        """Weighted sample sd of each standardized column, per weight row.

        This is the ratio of a subset's covariate sd to the full-data sd, which
        turns a penalty on the subset's own standardized slopes into a penalty
        on this design's coefficients.
        """
        Z = self.X1[:, 1:]
        total = weights.sum(axis=1, keepdims=True)
        mean = weights @ Z / total
        ss = weights @ (Z * Z) - total * mean**2
        var = np.clip(ss, 0.0, None) / np.maximum(total - 1.0, 1.0)
        ratios = np.sqrt(var)
        ratios[~(ratios > 0)] = 1.0
        return ratios


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        # per problem, so one singular system does not change the others
        out = np.empty(b.shape)
        for i in range(a.shape[0]):
            try:
                out[i] = np.linalg.solve(a[i], b[i])
            except np.linalg.LinAlgError:
                out[i] = np.linalg.pinv(a[i], hermitian=True) @ b[i]
        return out


def _inv(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError:
        out = np.empty(a.shape)
        for i in range(a.shape[0]):
            try:
                out[i] = np.linalg.inv(a[i])
            except np.linalg.LinAlgError:
                out[i] = np.linalg.pinv(a[i], hermitian=True)
        return out


def _softplus_expit(eta: np.ndarray):
    """``log(1 + exp(eta))`` and ``expit(eta)`` sharing one exponential."""
    e = np.exp(-np.abs(eta))
    inv = 1.0 / (1.0 + e)
    pi = np.where(eta >= 0, inv, e * inv)
    return np.maximum(eta, 0.0) + np.log1p(e), pi


def _info(design: Design, v: np.ndarray) -> np.ndarray:
    return (v @ design.outer).reshape(-1, design.d, design.d)


def _objective(design, y, c, gamma, firth, pen):
    """Objective value, linear predictor and probabilities at ``gamma``."""
    eta = gamma @ design.X1.T
    soft, pi = _softplus_expit(eta)
    obj = np.sum(c * (y * eta - soft), axis=1)
    if firth:
        sign, logdet = np.linalg.slogdet(_info(design, c * pi * (1.0 - pi)))
        obj = obj + 0.5 * np.where(sign > 0, logdet, -np.inf)
    elif pen is not None:
        obj = obj - np.sum(pen * gamma * gamma, axis=1)
    return obj, eta, pi


def _newton(design, y, c, start, spec, *, firth=False, pen=None):
    """Newton-Raphson with step-halving for a batch of weighted problems.

    Maximizes ``l`` (``pen`` None), ``l - sum(pen * gamma**2)`` or, with
    ``firth``, ``l + 0.5 log det I``.  Returns coefficients on the design's
    standardized scale, convergence flags, iteration counts and the final
    objective values.
    """
    X1 = design.X1
    gamma = np.array(start, dtype=float)
    m = gamma.shape[0]
    converged = np.zeros(m, dtype=bool)
    iterations = np.zeros(m, dtype=int)
    obj, eta_all, pi_all = _objective(design, y, c, gamma, firth, pen)
    active = np.arange(m)

    for _ in range(spec.max_iterations):
        if active.size == 0:
            break
        g = gamma[active]
        ca = c[active]
        pa = None if pen is None else pen[active]
        pi = pi_all[active]
        v = ca * pi * (1.0 - pi)
        info = _info(design, v)
        resid = ca * (y - pi)
        if firth:
            inv = _inv(info)
            h = v * (inv.reshape(len(active), -1) @ design.outer.T)
            step = (inv @ ((resid + h * (0.5 - pi)) @ X1)[..., None])[..., 0]
        elif pa is None:
            step = _solve(info, resid @ X1)
        else:
            hess = info + 2.0 * pa[:, :, None] * np.eye(design.d)
            step = _solve(hess, resid @ X1 - 2.0 * pa * g)
        step[~np.all(np.isfinite(step), axis=1)] = 0.0
        iterations[active] += 1

        old = obj[active]
        slack = _OBJECTIVE_SLACK * (1.0 + np.abs(old))
        trial = g + step
        new, eta_new, pi_new = _objective(design, y, ca, trial, firth, pa)
        for _ in range(spec.max_halvings):
            worse = ~(new >= old - slack)
            if not worse.any():
                break
            step[worse] *= 0.5
            trial[worse] = g[worse] + step[worse]
            new[worse], eta_new[worse], pi_new[worse] = _objective(
                design, y, ca[worse], trial[worse], firth, None if pa is None else pa[worse]
            )
        rejected = ~(new >= old - slack)
        if rejected.any():
            trial[rejected] = g[rejected]
            new[rejected] = old[rejected]
            pi_new[rejected] = pi[rejected]
        gamma[active] = trial
        obj[active] = new
        pi_all[active] = pi_new

        small = np.max(np.abs(step), axis=1) < spec.convergence_tolerance
        done = small & ~rejected
        converged[active[done]] = True
        active = active[~(done | rejected)]

    return gamma, converged, iterations, obj, pi_all


def _start(design: Design, y: np.ndarray, c: np.ndarray) -> np.ndarray:
    rate = (c @ y) / c.sum(axis=1)
    rate = np.clip(rate, 1e-6, 1.0 - 1e-6)
    start = np.zeros((c.shape[0], design.d))
    start[:, 0] = np.log(rate / (1.0 - rate))
    return start


def _effective_df(info: np.ndarray, pen: np.ndarray) -> np.ndarray:
    hess = info + 2.0 * pen[:, :, None] * np.eye(info.shape[-1])
    return np.trace(_solve_matrix(hess, info), axis1=1, axis2=2)


def _solve_matrix(a, b):
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        out = np.empty(b.shape)
        for i in range(a.shape[0]):
            try:
                out[i] = np.linalg.solve(a[i], b[i])
            except np.linalg.LinAlgError:
                out[i] = np.linalg.pinv(a[i], hermitian=True) @ b[i]
        return out


@dataclass
class BatchFit:
    """Result of fitting one estimator to every weight row of a batch."""

    design: Design
    coef: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    df_e: np.ndarray
    lam: np.ndarray | None = None

    @property
    def probs(self) -> np.ndarray:
        """Predicted probabilities for every row of the fitted dataset, ``(m, n)``."""
        return expit(self.coef @ self.design.X1.T)

    @property
    def beta(self) -> np.ndarray:
        return self.design.to_original(self.coef)


def _fit_chunk(design, y, c, spec):
    if spec.kind is EstimatorKind.ML:
        gamma, conv, it, _, _ = _newton(design, y, c, _start(design, y, c), spec)
        return gamma, conv, it, np.full(len(c), float(design.d)), None
    if spec.kind is EstimatorKind.FIRTH:
        gamma, conv, it, _, _ = _newton(design, y, c, _start(design, y, c), spec, firth=True)
        return gamma, conv, it, np.full(len(c), float(design.d)), None
    return _ridge_path(design, y, c, spec)


def _ridge_path(design, y, c, spec):
    """Fit every penalty of the grid and keep the penalized-AIC minimizer.

    Positive penalties are visited from largest to smallest with warm starts;
    the zero penalty is the ML fit from a cold start.  Strict improvement is
    required to replace the incumbent, so ties go to the larger penalty.
    """
    m, d = c.shape[0], design.d
    grid = spec.grid_for(c.sum(axis=1))
    ratios2 = np.column_stack([np.zeros(m), design.subset_scale_ratios(c) ** 2])

    best_aic = np.full(m, np.inf)
    best = np.zeros((m, d))
    best_conv = np.zeros(m, dtype=bool)
    best_it = np.zeros(m, dtype=int)
    best_df = np.full(m, float(d))
    best_lam = np.zeros(m)

    def consider(gamma, conv, it, loglik, df, lam):
        aic = -2.0 * loglik + 2.0 * df
        aic[~np.isfinite(aic)] = np.inf
        better = aic < best_aic
        best_aic[better] = aic[better]
        best[better] = gamma[better]
        best_conv[better] = conv[better]
        best_it[better] = it[better]
        best_df[better] = df[better]
        best_lam[better] = lam[better]

    gamma = _start(design, y, c)
    for col in range(grid.shape[1] - 1, 0, -1):
        lam = grid[:, col]
        pen = lam[:, None] * ratios2
        gamma, conv, it, obj, pi = _newton(design, y, c, gamma, spec, pen=pen)
        df = _effective_df(_info(design, c * pi * (1.0 - pi)), pen)
        consider(gamma, conv, it, obj + np.sum(pen * gamma * gamma, axis=1), df, lam)

    gamma0, conv0, it0, obj0, _ = _newton(design, y, c, _start(design, y, c), spec)
    consider(gamma0, conv0, it0, obj0, np.full(m, float(d)), np.zeros(m))
    return best, best_conv, best_it, best_df, best_lam


def fit_batch(data: Dataset, spec: EstimatorSpec, weights) -> BatchFit:
    """Fit ``spec`` once per row of ``weights`` (shape ``(m, n)``, non-negative).

    Rows are treated as frequency weights: a bootstrap resample is its
    multiplicity vector, a cross-validation training set its 0/1 mask.
    No validity checks are made here; see :mod:`logitval.resampling`.
    """
    c = np.atleast_2d(np.asarray(weights, dtype=float))
    if c.shape[1] != data.n:
        raise DimensionMismatch(f"weights have {c.shape[1]} columns for {data.n} observations")
    design = Design(data.X)
    y = data.y
    size = max(1, _CHUNK_CELLS // max(data.n, 1))
    if spec.kind is EstimatorKind.RIDGE:
        size = max(1, size // 4)
    parts = [_fit_chunk(design, y, c[i : i + size], spec) for i in range(0, c.shape[0], size)]
    coef = np.concatenate([q[0] for q in parts]) if parts else np.zeros((0, design.d))
    conv = np.concatenate([q[1] for q in parts]) if parts else np.zeros(0, bool)
    it = np.concatenate([q[2] for q in parts]) if parts else np.zeros(0, int)
    df = np.concatenate([q[3] for q in parts]) if parts else np.zeros(0)
    lam = None
    if spec.kind is EstimatorKind.RIDGE and parts:
        lam = np.concatenate([q[4] for q in parts])
    return BatchFit(design, coef, conv, it, df, lam)


# --- validation helpers -----------------------------------------------------


def rank_deficient_columns(X1: np.ndarray) -> np.ndarray:
    """Column indices found linearly dependent by pivoted QR (empty if full rank)."""
    n, d = X1.shape
    if n < d:
        _, r, piv = linalg.qr(X1, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        keep = int(np.sum(diag >= PIVOT_TOLERANCE * diag.max())) if diag.size else 0
        return np.sort(piv[keep:])
    r, piv = linalg.qr(X1, mode="r", pivoting=True)
    diag = np.abs(np.diag(r))
    top = diag.max() if diag.size else 0.0
    if top == 0.0:
        return np.arange(d)
    return np.sort(piv[diag < PIVOT_TOLERANCE * top])


def _column_label(data: Dataset, j: int) -> str:
    return "(intercept)" if j == 0 else data.names[j - 1]


def check_fittable(data: Dataset, *, allow_collinear: bool = False) -> None:
    if data.y.min() == data.y.max():
        raise SingleClassOutcome("all outcomes are equal; need both events and non-events")
    if not allow_collinear:
        bad = rank_deficient_columns(Design(data.X).X1)
        if bad.size:
            raise CollinearDesign([_column_label(data, int(j)) for j in bad])


# --- single fits ------------------------------------------------------------


def _as_model(data, spec, batch, *, lam=None) -> FittedModel:
    beta = batch.beta[0]
    eta = beta[0] + data.X @ beta[1:]
    ll = float(np.sum(data.y * eta - np.logaddexp(0.0, eta)))
    sep = detect_separation(data) is Separation.SEPARATED
    return FittedModel(
        kind=spec.kind,
        beta=beta,
        converged=bool(batch.converged[0]),
        separation_detected=sep,
        loglik=ll,
        df_e=float(batch.df_e[0]),
        lam=lam,
        n_iter=int(batch.iterations[0]),
    )


def _require(spec, kind):
    if spec is None:
        return EstimatorSpec(kind)
    if spec.kind is not kind:
        raise ValueError(f"expected an estimator spec of kind {kind.value}, got {spec.kind.value}")
    return spec


def fit_ml(data: Dataset, spec: EstimatorSpec | None = None) -> FittedModel:
    """Maximum likelihood by Newton-Raphson.

    At the iteration cap (e.g. under separation) the last iterate is returned
    with ``converged=False``.
    """
    spec = _require(spec, EstimatorKind.ML)
    check_fittable(data)
    return _as_model(data, spec, fit_batch(data, spec, np.ones((1, data.n))))


def fit_firth(data: Dataset, spec: EstimatorSpec | None = None) -> FittedModel:
    """Firth's penalized likelihood ``l + 0.5 log det I``; finite under separation."""
    spec = _require(spec, EstimatorKind.FIRTH)
    check_fittable(data)
    return _as_model(data, spec, fit_batch(data, spec, np.ones((1, data.n))))


def fit_ridge_fixed(data: Dataset, lam: float, spec: EstimatorSpec | None = None) -> FittedModel:
    """Ridge fit maximizing ``l - lam * sum(standardized slopes ** 2)``."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    spec = spec or EstimatorSpec(EstimatorKind.RIDGE)
    check_fittable(data, allow_collinear=lam > 0)
    design = Design(data.X)
    c = np.ones((1, data.n))
    ml_spec = EstimatorSpec(EstimatorKind.ML, spec.max_iterations, spec.convergence_tolerance,
                            max_halvings=spec.max_halvings)
    if lam == 0:
        gamma, conv, it, _, _ = _newton(design, data.y, c, _start(design, data.y, c), ml_spec)
    else:
        pen = np.concatenate([[0.0], np.full(design.d - 1, float(lam))])[None, :]
        gamma, conv, it, _, _ = _newton(design, data.y, c, _start(design, data.y, c), ml_spec, pen=pen)
    batch = BatchFit(design, gamma, conv, it, np.array([np.nan]))
    model = _as_model(data, EstimatorSpec(EstimatorKind.RIDGE), batch, lam=float(lam))
    df = effective_df(data, model, lam)
    return replace(model, df_e=df)


def fit_ridge(data: Dataset, spec: EstimatorSpec | None = None) -> FittedModel:
    """Ridge regression with the penalty chosen by penalized AIC ``-2 l + 2 df_e``."""
    spec = _require(spec, EstimatorKind.RIDGE)
    check_fittable(data)
    batch = fit_batch(data, spec, np.ones((1, data.n)))
    return _as_model(data, spec, batch, lam=float(batch.lam[0]))


def fit(data: Dataset, spec: EstimatorSpec) -> FittedModel:
    return {
        EstimatorKind.ML: fit_ml,
        EstimatorKind.FIRTH: fit_firth,
        EstimatorKind.RIDGE: fit_ridge,
    }[spec.kind](data, spec)


def effective_df(data: Dataset, model: FittedModel, lam: float) -> float:
    """trace(I (I + 2 lam P)^-1), P the identity on standardized slopes."""
    design = Design(data.X)
    gamma = design.from_original(model.beta)[None, :]
    pi = expit(gamma @ design.X1.T)
    info = _info(design, pi * (1.0 - pi))
    if lam == 0:
        return float(design.d)
    pen = np.concatenate([[0.0], np.full(design.d - 1, float(lam))])[None, :]
    hess = info + 2.0 * pen[:, :, None] * np.eye(design.d)
    try:
        return float(np.trace(np.linalg.solve(hess, info)[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularPenalizedHessian(str(exc)) from exc


# --- likelihood pieces on the original scale ----------------------------------


def _augmented(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([np.ones(X.shape[0]), X])


def predict_probs(model: FittedModel | np.ndarray, X) -> np.ndarray:
    beta = model.beta if isinstance(model, FittedModel) else np.asarray(model, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if beta.size == 2 else X[None, :]
    if X.shape[1] != beta.size - 1:
        raise DimensionMismatch(f"model has {beta.size - 1} covariates, X has {X.shape[1]}")
    return expit(beta[0] + X @ beta[1:])


def fisher_components(data: Dataset, beta) -> FisherComponents:
    """Information ``X'WX`` and leverages ``h_i`` at ``beta`` (original scale)."""
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    Xa = _augmented(data.X)
    pi = expit(Xa @ beta)
    w = pi * (1.0 - pi)
    info = (Xa * w[:, None]).T @ Xa
    try:
        inv = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc
    if not np.all(np.isfinite(inv)):
        raise SingularInformation("information matrix is singular")
    h = w * np.einsum("ij,jk,ik->i", Xa, inv, Xa)
    return FisherComponents(info=info, hat_diagonals=h)


def log_likelihood(data: Dataset, beta) -> float:
    eta = _augmented(data.X) @ np.asarray(beta, dtype=float)
    return float(np.sum(data.y * eta - np.logaddexp(0.0, eta)))


def _ridge_weights(data: Dataset) -> np.ndarray:
    return np.concatenate([[0.0], Design(data.X).scale ** 2])


def penalized_log_likelihood(data: Dataset, beta, kind: EstimatorKind, lam: float = 0.0) -> float:
    """The objective each estimator maximizes, as a function of original-scale ``beta``."""
    kind = EstimatorKind(kind)
    beta = np.asarray(beta, dtype=float)
    ll = log_likelihood(data, beta)
    if kind is EstimatorKind.FIRTH:
        sign, logdet = np.linalg.slogdet(fisher_components(data, beta).info)
        return ll + 0.5 * logdet if sign > 0 else -np.inf
    if kind is EstimatorKind.RIDGE:
        return ll - lam * float(np.sum(_ridge_weights(data) * beta**2))
    return ll


def score(data: Dataset, beta, kind: EstimatorKind, lam: float = 0.0) -> np.ndarray:
    """Analytic gradient of :func:`penalized_log_likelihood`."""
    kind = EstimatorKind(kind)
    beta = np.asarray(beta, dtype=float)
    Xa = _augmented(data.X)
    pi = expit(Xa @ beta)
    resid = data.y - pi
    if kind is EstimatorKind.FIRTH:
        resid = resid + fisher_components(data, beta).hat_diagonals * (0.5 - pi)
    grad = Xa.T @ resid
    if kind is EstimatorKind.RIDGE:
        grad = grad - 2.0 * lam * _ridge_weights(data) * beta
    return grad
