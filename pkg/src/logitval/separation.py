"""Detection of complete or quasi-complete separation by linear programming."""

from __future__ import annotations

import enum

import numpy as np
from scipy.optimize import linprog

# optimal LP objective above which a separating direction is declared
SEPARATION_TOLERANCE = 1e-7


class Separation(str, enum.Enum):
    NONE = "none"
    SEPARATED = "separated"


def detect_separation(data) -> Separation:
    """Decide whether some direction separates events from non-events.

    Solves

        max  sum_i s_i (g0 + x_i'g)
        s.t. s_i (g0 + x_i'g) >= 0 for all i,   -1 <= g <= 1,

    with ``s_i = 2 y_i - 1`` on standardized covariates.  A strictly positive
    optimum means a nonzero direction classifies every observation correctly
    or on the boundary, with at least one strictly correct.
    """
    X = np.asarray(data.X, dtype=float)
    y = np.asarray(data.y, dtype=float)
    scale = X.std(axis=0)
    scale[~(scale > 0)] = 1.0
    Z = np.column_stack([np.ones(len(y)), (X - X.mean(axis=0)) / scale])
    signed = (2.0 * y - 1.0)[:, None] * Z
    res = linprog(
        -signed.sum(axis=0),
        A_ub=-signed,
        b_ub=np.zeros(len(y)),
        bounds=[(-1.0, 1.0)] * Z.shape[1],
        method="highs",
    )
    if res.status == 0 and -res.fun > SEPARATION_TOLERANCE:
        return Separation.SEPARATED
    return Separation.NONE
