"""Apparent and optimism-corrected c-statistics for a small dataset.

Shows every resampling scheme side by side and the leave-one-out pooling
artefact: with no real signal, pooled left-out predictions rank events
below non-events.

    python demos/03_resampling.py
"""

import numpy as np

from logitval import Dataset, EstimatorSpec, assess, dot632plus, loo_cv

rng = np.random.default_rng(7)
n = 60
X = rng.normal(size=(n, 3))
y = (rng.random(n) < 1 / (1 + np.exp(-(-1.0 + 0.9 * X[:, 0])))).astype(float)
data = Dataset(y, X, ("age", "bmi", "sbp"))

methods = ["apparent", "loo", "lpo", "kfold", "enhboot", "632plus", "simpleboot"]
print(f"{'':8s}" + "".join(f"{m:>11s}" for m in methods))
for kind in ("ml", "firth", "ridge"):
    results = assess(data, EstimatorSpec(kind), methods, ["cstat"], repetitions=10,
                     bootstrap_count=100, seed=1)
    print(f"{kind:8s}" + "".join(f"{r.value:11.3f}" for r in results))

_, trace = dot632plus(data, EstimatorSpec("ml"), "cstat", B=100, seed=1)
print(f"\n.632+ for ML: apparent {trace.c_app:.3f}, out-of-bag {trace.c_oob:.3f}, "
      f"R {trace.R_hat:.3f}, weight {trace.w_hat:.3f}")

# Pure noise: 5 events among 20, covariates unrelated to the outcome.
ml, rr = [], []
for _ in range(100):
    noise = Dataset(np.r_[np.ones(5), np.zeros(15)], rng.normal(size=(20, 2)))
    ml.append(loo_cv(noise, EstimatorSpec("ml"), "cstat").value)
    rr.append(loo_cv(noise, EstimatorSpec("ridge"), "cstat").value)
print(f"\nnull data, mean LOO c: ML {np.mean(ml):.3f}, ridge {np.mean(rr):.3f} (truth 0.5)")
