"""Time quantities, affine clock models and the timestamping-noise model.

Times are plain floats (or numpy arrays) in seconds, measured relative to the
origin of the current ranging transaction. Event times and timestamps use
``TIME_DTYPE`` (``numpy.longdouble``): a 0.1 s interval held in float64 has a
resolution of ~1.4e-17 s, too coarse to resolve sub-attosecond estimator
residuals.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

TIME_DTYPE = np.longdouble

Seconds = float
SecondsSq = float  # variances
ArrayLike = Union[float, np.ndarray]

MAX_ABS_SKEW = 1e-3

#: Timestamp noise variance giving a 2.5 cm range standard deviation.
DEFAULT_R: SecondsSq = 6.96e-21

#: DW1000 timestamp resolution.
DW1000_TICK: Seconds = 15.65e-12


def check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def seconds_to_cm(t: ArrayLike) -> ArrayLike:
    """Convert a time (or standard deviation in time) to centimetres of range."""
    return t * SPEED_OF_LIGHT * 100.0


def variance_to_cm2(var: ArrayLike) -> ArrayLike:
    return var * (SPEED_OF_LIGHT * 100.0) ** 2


@dataclass(frozen=True)
class ClockParams:
    """Clock offset at the transaction origin and constant skew of one transceiver.

    ``skew`` is dimensionless; 20 ppm is ``20e-6``.
    """

    offset: Seconds = 0.0
    skew: float = 0.0

    def __post_init__(self):
        check_finite("offset", self.offset)
        check_finite("skew", self.skew)
        if abs(self.skew) >= MAX_ABS_SKEW:
            raise ValueError(
                f"|skew| must be below {MAX_ABS_SKEW:g} (1000 ppm), got {self.skew!r}"
            )

    @classmethod
    def from_ppm(cls, skew_ppm: float, offset: Seconds = 0.0) -> "ClockParams":
        return cls(offset=offset, skew=skew_ppm / 1e6)


class Distribution(enum.Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    NONE = "none"


@dataclass(frozen=True)
class NoiseModel:
    """Independent zero-mean timestamping noise with variance ``variance_R``.

    ``quantization_tick`` rounds each draw to the nearest multiple of the tick,
    adding about ``tick**2 / 12`` of variance when the tick is small against
    the noise.
    """

    variance_R: SecondsSq = DEFAULT_R
    distribution: Distribution = Distribution.GAUSSIAN
    quantization_tick: Optional[Seconds] = None

    def __post_init__(self):
        check_finite("variance_R", self.variance_R)
        if self.variance_R < 0:
            raise ValueError("variance_R must be non-negative")
        if not isinstance(self.distribution, Distribution):
            object.__setattr__(self, "distribution", Distribution(self.distribution))
        if self.quantization_tick is not None:
            check_finite("quantization_tick", self.quantization_tick)
            if self.quantization_tick <= 0:
                raise ValueError("quantization_tick must be positive")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(variance_R=0.0, distribution=Distribution.NONE)

    @property
    def effective_variance(self) -> SecondsSq:
        if self.distribution is Distribution.NONE or self.variance_R == 0.0:
            return 0.0
        if self.quantization_tick is None:
            return self.variance_R
        return self.variance_R + self.quantization_tick**2 / 12.0

    @property
    def std(self) -> Seconds:
        return math.sqrt(self.effective_variance)


def to_clock(t: ArrayLike, clock: ClockParams) -> ArrayLike:
    """Resolve elapsed time ``t`` since the transaction origin in ``clock``.

    >>> float(to_clock(1e-3, ClockParams(skew=20e-6)))
    0.00100002
    """
    t = np.asarray(t, dtype=TIME_DTYPE)
    out = t + (TIME_DTYPE(clock.offset) + TIME_DTYPE(clock.skew) * t)
    return out[()] if out.ndim == 0 else out


def sample_noise(
    model: NoiseModel, rng: np.random.Generator, size=None
) -> ArrayLike:
    """Draw timestamping noise from ``model``.

    Returns a float when ``size`` is None, otherwise an array of that shape.
    """
    dist = model.distribution
    if dist is Distribution.NONE or model.variance_R == 0.0:
        draw = np.zeros(size) if size is not None else 0.0
        return draw
    sigma = math.sqrt(model.variance_R)
    if dist is Distribution.GAUSSIAN:
        draw = rng.normal(0.0, sigma, size)
    elif dist is Distribution.UNIFORM:
        half_width = math.sqrt(3.0) * sigma
        draw = rng.uniform(-half_width, half_width, size)
    else:  # pragma: no cover
        raise ValueError(f"unknown distribution {dist!r}")
    if model.quantization_tick is not None:
        tick = model.quantization_tick
        draw = np.round(np.asarray(draw) / tick) * tick
    if size is None:
        return float(draw)
    return draw


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent, reproducible generators for ``n`` workers derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.default_rng(child) for child in children]
