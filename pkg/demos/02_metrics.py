"""The three performance measures and their pairwise reading.

    python demos/02_metrics.py
"""

import numpy as np

from logitval import brier_score, c_statistic, discrimination_slope, winsorize_cstat

probs = np.array([0.7, 0.3, 0.5, 0.1])
outcomes = np.array([1, 1, 0, 0])

print("c-statistic:         ", c_statistic(probs, outcomes))
print("discrimination slope:", round(discrimination_slope(probs, outcomes), 4))
print("Brier score:         ", round(brier_score(probs, outcomes), 4))

# The slope is also the mean difference over all event/non-event pairs.
ev, ne = probs[outcomes == 1], probs[outcomes == 0]
print("mean pairwise difference:", round(np.mean(ev[:, None] - ne[None, :]), 4))

# A non-informative model that predicts the event rate.
for rate in (0.5, 0.25):
    y = np.r_[np.ones(int(100 * rate)), np.zeros(100 - int(100 * rate))]
    print(f"constant {rate} at event rate {rate}: Brier {brier_score(np.full(100, rate), y):.4f}")

# Weights act as frequencies, so a bootstrap resample never needs copying.
w = np.array([2, 0, 1, 3])
print("weighted c:", c_statistic(probs, outcomes, w),
      "= duplicated c:", c_statistic(np.repeat(probs, w), np.repeat(outcomes, w)))

print("winsorized c-statistics:", winsorize_cstat(np.array([0.31, 0.5, 0.82])))
