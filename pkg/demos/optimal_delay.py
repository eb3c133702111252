"""
Choosing the second response delay
===================================

A longer second delay lowers the variance of one DS-TWR measurement but
makes each measurement take longer. The averaged uncertainty weighs both,
and its minimum sits at the positive root of a depressed cubic.
"""

import numpy as np

from twrsim import ObjectiveParams, ds_variance, r_avg, solve_optimal_delay
from twrsim.optimizer import measurement_rate
from twrsim.timebase import DEFAULT_R, seconds_to_cm

# 0.35 ms first delay, 7.2 ms of register reads and arithmetic per measurement
params = ObjectiveParams(dt32=3.5e-4, processing_T=7.2e-3, R=DEFAULT_R)
opt = solve_optimal_delay(params)
print(f"optimal dt53 = {opt.dt53_star * 1e3:.4f} ms (cubic residual {opt.relative_residual:.1e})")

# the trade-off around the optimum
for dt53 in np.array([0.2, 0.5, 1.0, 1.93, 4.0, 10.0, 20.0]) * 1e-3:
    std = seconds_to_cm(np.sqrt(ds_variance(params.R, params.dt32, dt53)))
    rate = measurement_rate(dt53, params.dt32, params.processing_T)
    print(f"dt53 {dt53 * 1e3:6.2f} ms  std {std:5.2f} cm  rate {rate:4.0f} Hz  "
          f"r_avg {r_avg(dt53, params):.3e} s^3")

# the root moves with the overheads but not with the noise level
for T in (0.0, 2e-3, 7.2e-3, 20e-3):
    p = ObjectiveParams(3.5e-4, T, DEFAULT_R)
    print(f"T = {T * 1e3:4.1f} ms -> dt53* = {solve_optimal_delay(p).dt53_star * 1e3:.3f} ms")
