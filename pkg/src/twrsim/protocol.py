"""Timestamp generation for SS-TWR / DS-TWR transactions and the ToF estimators.

Event times are built exactly, in transaction-relative time with the first
transmission at ``T1 = 0``::

    T1 = 0                 (i transmits)
    T2 = tf1               (j receives)
    T3 = T2 + dt32         (j replies)
    T4 = T3 + tf2          (i receives)
    T5 = T3 + dt53         (j transmits again, DS only)
    T6 = T5 + tf3          (i receives, DS only)

with ``tf2 = tf1 + vbar * dt32`` and ``tf3 = tf2 + vbar * dt53`` under
constant relative velocity. Each event is mapped through its owning
transceiver's affine clock and then corrupted by timestamping noise. None of
the small-term approximations used by the closed-form models in
:mod:`twrsim.analytics` are applied here.
"""

from __future__ import annotations

import csv
import enum
import io
from fractions import Fraction

try:
    from gmpy2 import mpq as _exact
except ImportError:  # pragma: no cover
    _exact = Fraction

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

import numpy as np

from twrsim.errors import DegenerateInterval
from twrsim.timebase import (
    SPEED_OF_LIGHT,
    TIME_DTYPE,
    ArrayLike,
    ClockParams,
    NoiseModel,
    Seconds,
    check_finite,
    sample_noise,
)

_EXACT_TYPES = frozenset((Fraction, type(_exact(0))))

MAX_ABS_VBAR = 1e-6

CSV_COLUMNS = ("t1_i", "t2_j", "t3_j", "t4_i", "t5_j", "t6_i", "mode")


class Mode(enum.Enum):
    SS_ONLY = "SsOnly"
    DS = "Ds"


class Protocol(enum.Enum):
    SS = "SS"
    DS = "DS"


def _all(flags) -> bool:
    return bool(flags.all()) if isinstance(flags, np.ndarray) else bool(flags)


@dataclass(frozen=True)
class Scene:
    """Initial time-of-flight and relative radial velocity ``vbar = v / c``."""

    tof_initial: Seconds
    vbar: float = 0.0

    def __post_init__(self):
        check_finite("tof_initial", self.tof_initial)
        check_finite("vbar", self.vbar)
        if self.tof_initial < 0:
            raise ValueError("tof_initial must be non-negative")
        if abs(self.vbar) >= MAX_ABS_VBAR:
            raise ValueError(f"|vbar| must be below {MAX_ABS_VBAR:g}")

    @classmethod
    def from_distance(cls, distance_m: float, velocity_mps: float = 0.0) -> "Scene":
        return cls(distance_m / SPEED_OF_LIGHT, velocity_mps / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class TimingConfig:
    """Programmed response delays and per-measurement processing time."""

    dt32: Seconds
    dt53: Seconds
    processing_T: Seconds = 0.0

    def __post_init__(self):
        for name in ("dt32", "dt53", "processing_T"):
            check_finite(name, getattr(self, name))
        if self.dt32 <= 0 or self.dt53 <= 0:
            raise ValueError("dt32 and dt53 must be positive")
        if self.processing_T < 0:
            raise ValueError("processing_T must be non-negative")

    @property
    def period(self) -> Seconds:
        """Session time occupied by one DS-TWR measurement."""
        return self.processing_T + self.dt32 + self.dt53

    def replace(self, **changes) -> "TimingConfig":
        fields = dict(dt32=self.dt32, dt53=self.dt53, processing_T=self.processing_T)
        fields.update(changes)
        return TimingConfig(**fields)


@dataclass(frozen=True)
class TimestampSet:
    """Noisy timestamps of one transaction, or of a batch when fields are arrays.

    ``t1_i``, ``t4_i``, ``t6_i`` are in transceiver i's clock; ``t2_j``,
    ``t3_j``, ``t5_j`` in transceiver j's clock. ``t5_j`` and ``t6_i`` are
    None for SS-only transactions.
    """

    t1_i: ArrayLike
    t2_j: ArrayLike
    t3_j: ArrayLike
    t4_i: ArrayLike
    t5_j: Optional[ArrayLike] = None
    t6_i: Optional[ArrayLike] = None
    mode: Mode = Mode.DS

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))
        if not _all(self.t4_i > self.t1_i):
            raise ValueError("t4_i must follow t1_i")
        if not _all(self.t3_j > self.t2_j):
            raise ValueError("t3_j must follow t2_j")
        if self.mode is Mode.DS:
            if self.t5_j is None or self.t6_i is None:
                raise ValueError("DS timestamp sets need t5_j and t6_i")
            if not _all(self.t5_j > self.t3_j):
                raise ValueError("t5_j must follow t3_j")
            if not _all(self.t6_i > self.t4_i):
                raise ValueError("t6_i must follow t4_i")

    def __len__(self) -> int:
        return int(np.size(self.t1_i))

    def rows(self) -> Iterable[tuple]:
        cols = [np.atleast_1d(self.t1_i), np.atleast_1d(self.t2_j),
                np.atleast_1d(self.t3_j), np.atleast_1d(self.t4_i)]
        if self.mode is Mode.DS:
            cols += [np.atleast_1d(self.t5_j), np.atleast_1d(self.t6_i)]
        for k in range(len(cols[0])):
            yield tuple(c[k] for c in cols)


@dataclass(frozen=True)
class TofEstimate:
    tof: ArrayLike
    protocol: Protocol
    range_m: ArrayLike

    @classmethod
    def from_tof(cls, tof, protocol: Protocol) -> "TofEstimate":
        return cls(tof=tof, protocol=protocol, range_m=tof * SPEED_OF_LIGHT)


def event_times(scene: Scene, timing: TimingConfig, exact: bool = False) -> tuple:
    """True event times T1..T6 (seconds since T1).

    Values are ``TIME_DTYPE`` scalars, or exact rationals when
    ``exact`` is set.
    """
    num = _exact if exact else TIME_DTYPE
    dt32 = num(timing.dt32)
    dt53 = num(timing.dt53)
    vbar = num(scene.vbar)
    tf1 = num(scene.tof_initial)
    tf2 = tf1 + vbar * dt32
    tf3 = tf2 + vbar * dt53
    T1 = num(0)
    T2 = tf1
    T3 = T2 + dt32
    T4 = T3 + tf2
    T5 = T3 + dt53
    T6 = T5 + tf3
    return T1, T2, T3, T4, T5, T6


def _resolve(t, offset, skew):
    # skew may be an array (per-transaction drift in the harness)
    if type(t) in _EXACT_TYPES:
        if not (offset or skew):
            return t
        return t + (_exact(offset) + _exact(skew) * t)
    t = TIME_DTYPE(t)
    return t + (np.asarray(offset, dtype=TIME_DTYPE) + np.asarray(skew, dtype=TIME_DTYPE) * t)


def _add_noise(value, draw):
    if type(value) in _EXACT_TYPES:
        draw = float(draw)
        return value + _exact(draw) if draw else value
    value = value + np.asarray(draw, dtype=TIME_DTYPE)
    return value[()] if np.ndim(value) == 0 else value


def stamp_events(
    times: tuple,
    clock_i: ClockParams,
    clock_j: ClockParams,
    noise_draws: np.ndarray,
    mode: Mode = Mode.DS,
    skew_i: Optional[ArrayLike] = None,
    skew_j: Optional[ArrayLike] = None,
    offset_i: Optional[ArrayLike] = None,
    offset_j: Optional[ArrayLike] = None,
) -> TimestampSet:
    """Map true event times through both clocks and add ``noise_draws``.

    ``noise_draws`` has a leading axis with one entry per timestamp, in event
    order (4 for SS-only, 6 for DS). The ``skew_*`` and ``offset_*`` arguments
    override the clock parameters and may be per-transaction arrays.
    """
    gi = clock_i.skew if skew_i is None else skew_i
    gj = clock_j.skew if skew_j is None else skew_j
    ti = clock_i.offset if offset_i is None else offset_i
    tj = clock_j.offset if offset_j is None else offset_j
    owners = [(ti, gi), (tj, gj), (tj, gj), (ti, gi), (tj, gj), (ti, gi)]
    n_stamps = 6 if mode is Mode.DS else 4
    stamped = []
    for k in range(n_stamps):
        offset, skew = owners[k]
        stamped.append(_add_noise(_resolve(times[k], offset, skew), noise_draws[k]))
    if mode is Mode.DS:
        t1, t2, t3, t4, t5, t6 = stamped
    else:
        (t1, t2, t3, t4), t5, t6 = stamped, None, None
    return TimestampSet(t1_i=t1, t2_j=t2, t3_j=t3, t4_i=t4, t5_j=t5, t6_i=t6, mode=mode)


def _check_tof_margin(scene: Scene, timing: TimingConfig) -> None:
    if timing.dt32 < 1000.0 * scene.tof_initial:
        warnings.warn(
            f"dt32={timing.dt32:g} s is not much longer than the time of flight "
            f"{scene.tof_initial:g} s; the closed-form models assume dt32 >> tof",
            stacklevel=3,
        )


def simulate_transactions(
    scene: Scene,
    clock_i: ClockParams,
    clock_j: ClockParams,
    timing: TimingConfig,
    noise: NoiseModel,
    rng: np.random.Generator,
    n: Optional[int] = None,
    mode: Mode = Mode.DS,
    exact: bool = False,
) -> TimestampSet:
    """Simulate ``n`` independent transactions with the same geometry and clocks.

    With ``n=None`` a single transaction with scalar timestamps is returned.
    ``exact`` (single transactions only) carries every time as an exact rational,
    so clock maps and the estimators are evaluated without rounding.
    """
    if exact and n is not None:
        raise ValueError("exact arithmetic is only available for single transactions")
    _check_tof_margin(scene, timing)
    n_stamps = 6 if mode is Mode.DS else 4
    shape = (n_stamps,) if n is None else (n_stamps, n)
    draws = sample_noise(noise, rng, size=shape)
    return stamp_events(event_times(scene, timing, exact), clock_i, clock_j, draws, mode)


def simulate_transaction(
    scene: Scene,
    clock_i: ClockParams,
    clock_j: ClockParams,
    timing: TimingConfig,
    noise: NoiseModel,
    rng: np.random.Generator,
    mode: Mode = Mode.DS,
    exact: bool = False,
) -> TimestampSet:
    """Simulate one transaction; six independent noise draws (four for SS-only)."""
    return simulate_transactions(scene, clock_i, clock_j, timing, noise, rng, None, mode, exact)


def _ss_tof(ts: TimestampSet):
    return ((ts.t4_i - ts.t1_i) - (ts.t3_j - ts.t2_j)) / 2


def _ds_tof(ts: TimestampSet):
    if ts.mode is not Mode.DS:
        raise ValueError("DS-TWR estimate needs a DS timestamp set")
    dt53_j = ts.t5_j - ts.t3_j
    if not _all(dt53_j != 0):
        raise DegenerateInterval("t5_j equals t3_j; skew ratio undefined")
    ratio = (ts.t6_i - ts.t4_i) / dt53_j
    return ((ts.t4_i - ts.t1_i) - ratio * (ts.t3_j - ts.t2_j)) / 2


def estimate_ss(ts: TimestampSet) -> TofEstimate:
    """Single-sided estimate ``((t4 - t1) - (t3 - t2)) / 2``."""
    return TofEstimate.from_tof(_ss_tof(ts), Protocol.SS)


def estimate_ds(ts: TimestampSet) -> TofEstimate:
    """Double-sided estimate with the skew-correcting ratio ``(t6 - t4) / (t5 - t3)``."""
    return TofEstimate.from_tof(_ds_tof(ts), Protocol.DS)


def estimate(ts: TimestampSet, protocol: Protocol) -> TofEstimate:
    protocol = Protocol(protocol)
    return estimate_ss(ts) if protocol is Protocol.SS else estimate_ds(ts)


# -- CSV --------------------------------------------------------------------


def _fmt_time(x) -> str:
    return np.format_float_scientific(TIME_DTYPE(x), unique=True)


def write_timestamp_csv(sets: Iterable[TimestampSet], stream: TextIO, header: bool = True) -> None:
    """Write timestamp rows with columns ``t1_i, t2_j, t3_j, t4_i, t5_j, t6_i, mode``.

    Values are written with enough digits to round-trip ``TIME_DTYPE``.
    """
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(CSV_COLUMNS)
    for ts in sets:
        for row in ts.rows():
            t1, t2, t3, t4 = (_fmt_time(v) for v in row[:4])
            if ts.mode is Mode.DS:
                t5, t6 = _fmt_time(row[4]), _fmt_time(row[5])
            else:
                t5 = t6 = ""
            writer.writerow((t1, t2, t3, t4, t5, t6, ts.mode.value))


def read_timestamp_csv(stream: TextIO) -> list[TimestampSet]:
    reader = csv.DictReader(stream)
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"timestamp CSV is missing columns {sorted(missing)}")
    out = []
    for row in reader:
        mode = Mode(row["mode"])
        vals = {k: TIME_DTYPE(row[k]) for k in ("t1_i", "t2_j", "t3_j", "t4_i")}
        if mode is Mode.DS:
            vals["t5_j"] = TIME_DTYPE(row["t5_j"])
            vals["t6_i"] = TIME_DTYPE(row["t6_i"])
        out.append(TimestampSet(mode=mode, **vals))
    return out


def timestamp_csv_text(sets: Iterable[TimestampSet]) -> str:
    buf = io.StringIO()
    write_timestamp_csv(sets, buf)
    return buf.getvalue()
