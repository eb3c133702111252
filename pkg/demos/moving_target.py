"""
Ranging a moving target
=======================

With constant velocity the flight times of the three messages differ.
DS-TWR still returns the flight time of the first message, exactly, while
SS-TWR picks up half the change over the first delay.
"""

from twrsim import ClockParams, NoiseModel, Scene, TimingConfig, estimate_ds, estimate_ss, simulate_transaction
from twrsim.timebase import SPEED_OF_LIGHT

ideal = ClockParams()
timing = TimingConfig(dt32=3.5e-4, dt53=1.9e-3)
for speed in (0.0, 1.0, 30.0, 250.0):
    scene = Scene.from_distance(10.0, speed)
    ts = simulate_transaction(scene, ideal, ideal, timing, NoiseModel.noiseless(), None, exact=True)
    ds = float(estimate_ds(ts).tof - type(ts.t1_i)(scene.tof_initial))
    ss = float(estimate_ss(ts).tof - type(ts.t1_i)(scene.tof_initial))
    print(f"{speed:6.1f} m/s  DS error {ds:.1e} s  SS error {ss * SPEED_OF_LIGHT * 1e6:8.3f} um")
