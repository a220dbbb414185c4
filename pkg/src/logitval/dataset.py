"""The binary-outcome dataset container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True)
class Dataset:
    """Binary outcomes ``y`` (0/1) with an ``n x p`` covariate matrix ``X``.

    Arrays are copied and made read-only on construction.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise DataError("y must be a vector and X a matrix")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
        if y.shape[0] < 2:
            raise DataError("a dataset needs at least two observations")
        if X.shape[1] < 1:
            raise DataError("a dataset needs at least one covariate")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("outcomes must be exactly 0 or 1")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates contain missing or non-finite values")
        names = tuple(self.names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} names given for {X.shape[1]} covariates")
        if len(set(names)) != len(names):
            raise DataError("covariate names must be unique")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.y.sum())

    def subset(self, index) -> "Dataset":
        """Rows selected by an index array or boolean mask (repeats allowed)."""
        return Dataset(self.y[index], self.X[index], self.names)
