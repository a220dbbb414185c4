"""Fitting one dataset three ways.

Maximum likelihood diverges on separated data, Firth's penalty keeps the
coefficients finite, and ridge picks its own amount of shrinkage by
penalized AIC.

    python demos/01_estimators.py
"""

import numpy as np

from logitval import (
    Dataset, EstimatorSpec, detect_separation, effective_df, fit_firth, fit_ml, fit_ridge,
    fit_ridge_fixed,
)

x = np.array([0.5, 1.0, 1.5, 2.0, 3.0, 3.5, 4.0, 4.5])
y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
data = Dataset(y, x[:, None], ("dose",))

print("separation:", detect_separation(data).value)
for iters in (10, 25):
    m = fit_ml(data, EstimatorSpec("ml", max_iterations=iters))
    print(f"ML, {iters:2d} iterations: slope {m.beta[1]:8.2f}  converged={m.converged}")

m = fit_firth(data)
print(f"Firth:                slope {m.beta[1]:8.2f}  converged={m.converged}")

# Ridge on noisier data: the penalized-AIC path and the chosen penalty.
rng = np.random.default_rng(1)
X = rng.normal(size=(60, 4))
y = (rng.random(60) < 1 / (1 + np.exp(-(X[:, 0] - 0.5)))).astype(float)
noisy = Dataset(y, X)

print("\n  lambda    df_e    penalized AIC")
for lam in (0.0, 0.1, 1.0, 10.0, 100.0):
    f = fit_ridge_fixed(noisy, lam)
    print(f"{lam:8.1f}  {f.df_e:6.3f}  {-2 * f.loglik + 2 * f.df_e:10.3f}")

best = fit_ridge(noisy)
print(f"chosen lambda {best.lam:.3g} with df_e {best.df_e:.3f} "
      f"(check: {effective_df(noisy, best, best.lam):.3f})")
print("ML slopes:   ", np.round(fit_ml(noisy).beta[1:], 3))
print("ridge slopes:", np.round(best.beta[1:], 3))
