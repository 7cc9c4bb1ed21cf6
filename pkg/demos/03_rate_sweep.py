"""
Measuring a convergence rate
============================

Run many independent trials at several budgets, average the point errors,
and fit a line in log-log space.  The slope is compared with the exponent
from the minimax rate table (log factors are not modelled).
"""

from berkson import Constant, ExperimentConfig, PowerLaw, run_sweep

cells = [
    ("passive k=1, sigma=0.1", ExperimentConfig("passive", 1, 0.25, Constant(0.1), (1000, 3000, 10_000), trials=200)),
    ("active  k=1, sigma=0.1", ExperimentConfig("active", 1, 0.25, Constant(0.1), (1000, 3000, 10_000), trials=200, t=0.2)),
    ("passive k=2, sigma=1/n", ExperimentConfig("passive", 2, 0.5, PowerLaw(1.0), (1000, 3000, 10_000), trials=200)),
]

for name, cfg in cells:
    res = run_sweep(cfg)
    errs = "  ".join(f"{c.mean_error:.2e}" for c in res.cells)
    fit = res.fit
    print(f"{name}: errors {errs} | slope {fit.slope:+.3f} vs {fit.theoretical_exponent:+.3f} ({fit.regime})")
