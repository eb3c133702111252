"""
Skew drift and SS-TWR
=====================

SS-TWR carries a bias of half the relative skew times the first delay. If
the skew drifts during a trial the bias wanders with it, which shows up as
extra variance. DS-TWR does not care.
"""

from twrsim import ClockParams, Protocol, TrialConfig, run_trial, ss_drift_experiment
from twrsim.harness import drift_variance_inflation
from twrsim.timebase import SPEED_OF_LIGHT, seconds_to_cm

cfg = TrialConfig(n_measurements=50_000, clocks=(ClockParams.from_ppm(20), ClockParams.from_ppm(-20)))
for protocol in Protocol:
    res = run_trial(cfg, protocol)
    print(f"{protocol.value}: mean error {res.mean_error_cm:7.2f} cm, std {res.std_cm:.2f} cm")

# a 1 ns walk in the SS bias over the trial
drift = 2e-9 / cfg.timing.dt32
res = ss_drift_experiment(cfg, drift)
extra = drift_variance_inflation(drift, cfg.timing.dt32)
print(f"SS with {drift * 1e6:.1f} ppm drift: std {res.std_cm:.2f} cm, "
      f"predicted {seconds_to_cm((cfg.noise.variance_R + extra) ** 0.5):.2f} cm")
