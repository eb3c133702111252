"""Monte Carlo trials, delay sweeps and ranging sessions.

Each trial simulates independent transactions and summarizes the ToF error
``estimate - tof_initial``. Sweeps evaluate one trial per ``dt53`` value and
pair the empirical statistics with the closed-form models.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, TextIO

import numpy as np
from scipy import stats

from twrsim.analytics import RelativeClock, ds_variance, ss_bias
from twrsim.errors import ZeroMeasurements
from twrsim.optimizer import ObjectiveParams, measurement_rate
from twrsim.protocol import (
    Mode,
    Protocol,
    Scene,
    TimingConfig,
    estimate,
    event_times,
    simulate_transactions,
    stamp_events,
    write_timestamp_csv,
)
from twrsim.timebase import (
    DEFAULT_R,
    MAX_ABS_SKEW,
    TIME_DTYPE,
    ClockParams,
    NoiseModel,
    Seconds,
    SecondsSq,
    sample_noise,
    seconds_to_cm,
)

CHUNK = 1 << 18

SWEEP_COLUMNS = (
    "dt53",
    "empirical_std",
    "empirical_rate",
    "empirical_r_avg",
    "analytic_std",
    "analytic_r_avg",
)


@dataclass(frozen=True)
class TrialConfig:
    n_measurements: int = 2500
    timing: TimingConfig = field(
        default_factory=lambda: TimingConfig(dt32=3.5e-4, dt53=1.9e-3, processing_T=7.2e-3)
    )
    scene: Scene = field(default_factory=lambda: Scene.from_distance(1.5))
    clocks: tuple[ClockParams, ClockParams] = (ClockParams(), ClockParams())
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(DEFAULT_R))
    seed: int = 0

    def __post_init__(self):
        if int(self.n_measurements) < 2:
            raise ValueError("n_measurements must be at least 2")

    @property
    def relative_clock(self) -> RelativeClock:
        return RelativeClock.between(*self.clocks)

    def objective(self) -> ObjectiveParams:
        return ObjectiveParams(self.timing.dt32, self.timing.processing_T, self.noise.variance_R)


@dataclass(frozen=True)
class TrialResult:
    mean_error: Seconds
    variance: SecondsSq
    n: int

    @property
    def std(self) -> Seconds:
        return math.sqrt(self.variance)

    @property
    def std_cm(self) -> float:
        return seconds_to_cm(self.std)

    @property
    def mean_error_cm(self) -> float:
        return seconds_to_cm(self.mean_error)

    @property
    def standard_error(self) -> Seconds:
        return self.std / math.sqrt(self.n)


@dataclass(frozen=True)
class SweepRow:
    dt53: Seconds
    empirical_std: Seconds
    empirical_rate: float
    empirical_r_avg: float
    analytic_std: Seconds
    analytic_r_avg: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in SWEEP_COLUMNS)


def variance_interval(variance: SecondsSq, n: int, confidence: float = 0.99) -> tuple[float, float]:
    """Two-sided chi-square interval for the sample variance of ``n`` Gaussian draws."""
    alpha = 1.0 - confidence
    dof = n - 1
    lo = variance * stats.chi2.ppf(alpha / 2, dof) / dof
    hi = variance * stats.chi2.ppf(1 - alpha / 2, dof) / dof
    return lo, hi


def _summarize(errors: np.ndarray) -> TrialResult:
    n = errors.size
    var = float(np.var(errors, ddof=1)) if n > 1 else 0.0
    return TrialResult(mean_error=float(np.mean(errors)), variance=var, n=n)


def _rng_for(cfg: TrialConfig, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(cfg.seed)


def trial_errors(
    cfg: TrialConfig,
    protocol: Protocol,
    rng: Optional[np.random.Generator] = None,
    log: Optional[TextIO] = None,
) -> np.ndarray:
    """ToF errors of ``cfg.n_measurements`` independent transactions, in float64 seconds."""
    protocol = Protocol(protocol)
    rng = _rng_for(cfg, rng)
    mode = Mode.DS if protocol is Protocol.DS else Mode.SS_ONLY
    clock_i, clock_j = cfg.clocks
    truth = TIME_DTYPE(cfg.scene.tof_initial)
    out = np.empty(cfg.n_measurements)
    header = True
    for start in range(0, cfg.n_measurements, CHUNK):
        m = min(CHUNK, cfg.n_measurements - start)
        ts = simulate_transactions(cfg.scene, clock_i, clock_j, cfg.timing, cfg.noise, rng, m, mode)
        if log is not None:
            write_timestamp_csv([ts], log, header=header)
            header = False
        out[start:start + m] = (estimate(ts, protocol).tof - truth).astype(float)
    return out


def run_trial(
    cfg: TrialConfig,
    protocol: Protocol = Protocol.DS,
    rng: Optional[np.random.Generator] = None,
    log: Optional[TextIO] = None,
) -> TrialResult:
    """Sample mean and unbiased sample variance of the ToF error over one trial.

    ``rng`` defaults to a generator seeded with ``cfg.seed``. If ``log`` is
    given, every transaction's timestamps are written to it as CSV.
    """
    return _summarize(trial_errors(cfg, protocol, rng, log))


# -- sweeps -------------------------------------------------------------------


def _sweep_row(args) -> SweepRow:
    cfg, seed_seq = args
    result = run_trial(cfg, Protocol.DS, rng=np.random.default_rng(seed_seq))
    timing = cfg.timing
    period = timing.period
    analytic_var = ds_variance(cfg.noise.effective_variance, timing.dt32, timing.dt53)
    return SweepRow(
        dt53=timing.dt53,
        empirical_std=result.std,
        empirical_rate=measurement_rate(timing.dt53, timing.dt32, timing.processing_T),
        empirical_r_avg=result.variance * period,
        analytic_std=math.sqrt(analytic_var),
        analytic_r_avg=period * analytic_var,
    )


def sweep_dt53(
    base: TrialConfig,
    dt53_values: Sequence[Seconds],
    common_random_numbers: bool = True,
    workers: int = 1,
) -> list[SweepRow]:
    """One DS-TWR trial per ``dt53`` value.

    With ``common_random_numbers`` every row reuses the noise stream seeded by
    ``base.seed``, so rows differ only through ``dt53`` and the empirical
    curves are smooth in it. Otherwise row ``k`` uses the ``k``-th child of
    the seed sequence. Rows come back in input order whatever ``workers`` is.
    """
    dt53_values = [float(v) for v in dt53_values]
    if any(v <= 0 for v in dt53_values):
        raise ValueError("all dt53 values must be positive")
    if common_random_numbers:
        seqs = [np.random.SeedSequence(base.seed) for _ in dt53_values]
    else:
        seqs = np.random.SeedSequence(base.seed).spawn(len(dt53_values))
    jobs = [(replace(base, timing=base.timing.replace(dt53=v)), s)
            for v, s in zip(dt53_values, seqs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(job) for job in jobs]


def sweep_grid(dt53_min: Seconds, dt53_max: Seconds, points: int, log_spaced: bool = True) -> np.ndarray:
    if dt53_min <= 0:
        raise ValueError("dt53_min must be positive")
    if points < 1:
        raise ValueError("points must be at least 1")
    if points > 1 and not dt53_min < dt53_max:
        raise ValueError("need dt53_min < dt53_max")
    if points == 1:
        return np.array([dt53_min])
    if log_spaced:
        return np.geomspace(dt53_min, dt53_max, points)
    return np.linspace(dt53_min, dt53_max, points)


def write_sweep_csv(rows: Sequence[SweepRow], stream: TextIO) -> None:
    """Header plus one line per row, floats with 12 significant digits."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([f"{v:.12g}" for v in row.as_tuple()])


def sweep_csv_text(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


def empirical_argmin(rows: Sequence[SweepRow]) -> Seconds:
    return min(rows, key=lambda r: r.empirical_r_avg).dt53


def analytic_argmin(rows: Sequence[SweepRow]) -> Seconds:
    return min(rows, key=lambda r: r.analytic_r_avg).dt53


# -- sessions and drift ------------------------------------------------------


def run_session(
    duration: Seconds, cfg: TrialConfig, protocol: Protocol = Protocol.DS,
    rng: Optional[np.random.Generator] = None,
) -> tuple[TrialResult, int]:
    """Back-to-back transactions filling ``duration`` seconds of session time.

    Transaction ``k`` starts at ``k * (T + dt32 + dt53)``; clock offsets at
    each start have advanced by ``skew * start``. Returns the error statistics
    and the number of completed measurements.
    """
    period = cfg.timing.period
    count = int(math.floor(duration / period))
    if duration <= 0 or count < 1:
        raise ZeroMeasurements(
            f"session of {duration:g} s is shorter than one transaction ({period:g} s)"
        )
    protocol = Protocol(protocol)
    rng = _rng_for(cfg, rng)
    mode = Mode.DS if protocol is Protocol.DS else Mode.SS_ONLY
    clock_i, clock_j = cfg.clocks
    starts = np.arange(count, dtype=float) * period
    n_stamps = 6 if mode is Mode.DS else 4
    draws = sample_noise(cfg.noise, rng, size=(n_stamps, count))
    ts = stamp_events(
        event_times(cfg.scene, cfg.timing), clock_i, clock_j, draws, mode,
        offset_i=clock_i.offset + clock_i.skew * starts,
        offset_j=clock_j.offset + clock_j.skew * starts,
    )
    errors = (estimate(ts, protocol).tof - TIME_DTYPE(cfg.scene.tof_initial)).astype(float)
    return _summarize(np.atleast_1d(errors)), count


def ss_drift_experiment(
    cfg: TrialConfig, skew_drift_per_trial: float,
    rng: Optional[np.random.Generator] = None,
) -> TrialResult:
    """SS-TWR trial whose relative skew ramps linearly by ``skew_drift_per_trial``.

    Transceiver i's skew moves from its configured value to that value plus
    the drift over the trial; the SS bias wanders by
    ``0.5 * skew_drift_per_trial * dt32`` and inflates the sample variance.
    """
    rng = _rng_for(cfg, rng)
    clock_i, clock_j = cfg.clocks
    n = cfg.n_measurements
    skew_i = clock_i.skew + skew_drift_per_trial * np.arange(n) / (n - 1)
    if np.any(np.abs(skew_i) >= MAX_ABS_SKEW):
        raise ValueError("skew drift takes clock i outside +-1000 ppm")
    draws = sample_noise(cfg.noise, rng, size=(4, n))
    ts = stamp_events(event_times(cfg.scene, cfg.timing), clock_i, clock_j, draws,
                      Mode.SS_ONLY, skew_i=skew_i)
    errors = (estimate(ts, Protocol.SS).tof - TIME_DTYPE(cfg.scene.tof_initial)).astype(float)
    return _summarize(errors)


def drift_variance_inflation(skew_drift_per_trial: float, dt32: Seconds) -> SecondsSq:
    """Variance added by a bias ramping uniformly over a trial, ``(delta bias)**2 / 12``."""
    return (0.5 * skew_drift_per_trial * dt32) ** 2 / 12.0


def expected_ss_mean(cfg: TrialConfig) -> Seconds:
    return ss_bias(cfg.relative_clock, cfg.timing.dt32)
