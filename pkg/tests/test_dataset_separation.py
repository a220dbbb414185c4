import numpy as np
import pytest

from logitval import Dataset, Separation, detect_separation, fit_ml
from logitval.exceptions import DataError

from conftest import make_data


def test_dataset_defaults_and_readonly():
    d = Dataset([0, 1, 1], [[1.0], [2.0], [3.0]])
    assert (d.n, d.p, d.n_events) == (3, 1, 2)
    assert d.names == ("x1",)
    with pytest.raises(ValueError):
        d.y[0] = 1


@pytest.mark.parametrize("y,X,names", [
    ([0, 2], [[1.0], [2.0]], ()),
    ([0, 1], [[1.0], [np.nan]], ()),
    ([1], [[1.0]], ()),
    ([0, 1], [[1.0, 2.0], [3.0, 4.0]], ("a", "a")),
    ([0, 1, 1], [[1.0], [2.0]], ()),
])
def test_dataset_rejects_invalid(y, X, names):
    with pytest.raises((DataError, ValueError)):
        Dataset(y, X, names)


def test_subset_keeps_names():
    d = Dataset([0, 1, 0, 1], np.arange(8.0).reshape(4, 2), ("a", "b"))
    s = d.subset([1, 3])
    assert s.names == ("a", "b") and s.n == 2 and np.all(s.y == 1)


def test_separation_examples():
    sep = Dataset([0, 0, 1, 1], [[0.0], [1.0], [2.0], [3.0]])
    mixed = Dataset([1, 0, 1, 0], [[0.0], [1.0], [2.0], [3.0]])
    assert detect_separation(sep) is Separation.SEPARATED
    assert detect_separation(mixed) is Separation.NONE


def test_quasi_complete_separation():
    d = Dataset([0, 0, 1, 0, 1, 1], [[0.0], [1.0], [2.0], [2.0], [3.0], [4.0]])
    assert detect_separation(d) is Separation.SEPARATED


def test_separation_in_second_covariate():
    rng = np.random.default_rng(0)
    x2 = np.r_[rng.uniform(0, 1, 10), rng.uniform(2, 3, 10)]
    y = np.r_[np.zeros(10), np.ones(10)]
    d = Dataset(y, np.column_stack([rng.normal(size=20), x2]))
    assert detect_separation(d) is Separation.SEPARATED


def test_separation_agrees_with_ml_divergence():
    rng = np.random.default_rng(11)
    agree = 0
    for _ in range(60):
        d = make_data(rng, n=12, p=2, beta=[0, 1.5, -1.5])
        m = fit_ml(d)
        sep = detect_separation(d) is Separation.SEPARATED
        diverged = np.max(np.abs(m.beta)) > 15
        agree += sep == diverged
    assert agree >= 57
