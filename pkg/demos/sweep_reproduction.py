"""
Sweeping the second response delay
===================================

Monte Carlo trials across a log grid of second delays, compared with the
closed-form variance and averaged uncertainty. Every row reuses the same
noise stream, so the empirical curves are smooth.
"""

import sys

import numpy as np

from twrsim import ObjectiveParams, TrialConfig, solve_optimal_delay, sweep_dt53
from twrsim.harness import empirical_argmin, sweep_grid, write_sweep_csv
from twrsim.timebase import DEFAULT_R, seconds_to_cm

base = TrialConfig(n_measurements=2500, seed=0)
grid = sweep_grid(2e-4, 2e-2, 200)
rows = sweep_dt53(base, grid)

for row in rows[::20]:
    print(f"dt53 {row.dt53 * 1e3:7.3f} ms  std {seconds_to_cm(row.empirical_std):5.2f} cm "
          f"(model {seconds_to_cm(row.analytic_std):5.2f})  rate {row.empirical_rate:4.0f} Hz")

root = solve_optimal_delay(ObjectiveParams(3.5e-4, 7.2e-3, DEFAULT_R)).dt53_star
print(f"empirical argmin {empirical_argmin(rows) * 1e3:.3f} ms, cubic root {root * 1e3:.3f} ms")

# pass a path to keep the table
if len(sys.argv) > 1:
    with open(sys.argv[1], "w", newline="") as fh:
        write_sweep_csv(rows, fh)
