"""A miniature version of the simulation study for one scenario.

Each replicate draws a training set, fits the three estimators, estimates
performance by resampling and compares it with the value on a large
independent validation set.

    python demos/04_simulation.py
"""

from logitval import ScenarioConfig, run_scenario, scenario_coefficients, summarize, winsorized_summary

scenario = ScenarioConfig(n=50, event_rate=0.25, effect_multiplier=1.0,
                          n_replicates=30, validation_size=20_000)
coefs = scenario_coefficients(scenario)
print(f"{scenario.label}: intercept {coefs.beta0:.3f}, slopes {coefs.slopes}")

run = run_scenario(scenario, ("ml", "firth", "ridge"), ["apparent", "loo", "kfold", "632plus"],
                   ["cstat"], repetitions=5, bootstrap_count=50)
print(f"separated datasets (full data): {100 * run.separation_rate:.0f}%")
print(f"{'estimator':10s}{'method':>10s}{'mean diff':>12s}{'RMSD':>10s}{'winsorized':>12s}")
for est in ("ml", "firth", "ridge"):
    for method in ("apparent", "loo", "kfold", "632plus"):
        cell = run.cell(est, method, "cstat")
        s, w = summarize(cell), winsorized_summary(cell)
        print(f"{est:10s}{method:>10s}{s.mean_diff:12.4f}{s.rmsd:10.4f}{w.mean_diff:12.4f}")
