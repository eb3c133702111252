"""Averaged uncertainty ``R_avg`` and its minimizing second-response delay.

The averaged uncertainty combines the DS-TWR single-measurement variance with
the measurement rate. Writing ``d = dt53``, ``a = dt32``::

    r_avg(d) = (T + a + d) * R * (1 + a/d + (a/d)**2)

Setting the derivative to zero and multiplying through by ``d**3`` gives the
depressed cubic ``d**3 + p d + q = 0`` with ``p = -a (T + 2a)`` and
``q = -2 a**2 (T + a)``. ``R`` cancels. Since ``p < 0`` and ``q < 0`` there is
exactly one positive root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from twrsim.analytics import ds_variance
from twrsim.errors import DegenerateInterval, NoPositiveRoot
from twrsim.timebase import ArrayLike, Seconds, SecondsSq, check_finite

# relative size of the discriminant below which Cardano is not trusted
_DISCRIMINANT_RTOL = 1e-12


@dataclass(frozen=True)
class ObjectiveParams:
    dt32: Seconds
    processing_T: Seconds
    R: SecondsSq

    def __post_init__(self):
        for name in ("dt32", "processing_T", "R"):
            check_finite(name, getattr(self, name))
        if self.dt32 <= 0:
            raise ValueError("dt32 must be positive")
        if self.processing_T < 0:
            raise ValueError("processing_T must be non-negative")
        if self.R <= 0:
            raise ValueError("R must be positive")


@dataclass(frozen=True)
class OptimalDelay:
    dt53_star: Seconds
    residual: float
    r_avg_at_star: float
    method: str = "cardano"
    constant_term: float = 0.0

    @property
    def relative_residual(self) -> float:
        if self.constant_term == 0:
            return abs(self.residual)
        return abs(self.residual / self.constant_term)


def r_avg(dt53: ArrayLike, params: ObjectiveParams) -> ArrayLike:
    """Averaged uncertainty: measurement period times single-measurement variance."""
    dt53 = np.asarray(dt53, dtype=float)
    if np.any(dt53 <= 0):
        raise DegenerateInterval("dt53 must be positive")
    period = params.processing_T + params.dt32 + dt53
    out = period * ds_variance(params.R, params.dt32, dt53)
    return float(out) if np.ndim(out) == 0 else out


def measurement_rate(dt53: ArrayLike, dt32: Seconds, processing_T: Seconds) -> ArrayLike:
    """Whole measurements completed per second."""
    out = np.floor(1.0 / (processing_T + dt32 + np.asarray(dt53, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def optimality_cubic(params: ObjectiveParams) -> tuple[float, float]:
    """Coefficients ``(p, q)`` of the stationarity condition ``t**3 + p t + q = 0``."""
    a, T = params.dt32, params.processing_T
    return -a * (T + 2 * a), -2 * a * a * (T + a)


def _cubic(t, p, q):
    return t * t * t + p * t + q


def depressed_cubic_real_roots(p: float, q: float) -> np.ndarray:
    """Real roots of ``t**3 + p t + q`` by Cardano's formula, ascending."""
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc > 0:
        s = math.sqrt(disc)
        u = np.cbrt(-q / 2 + s)
        v = np.cbrt(-q / 2 - s)
        return np.array([u + v])
    if p == 0:
        return np.array([0.0])
    # three real roots (casus irreducibilis): trigonometric form
    m = 2 * math.sqrt(-p / 3)
    arg = 3 * q / (p * m)
    theta = math.acos(min(1.0, max(-1.0, arg))) / 3
    roots = [m * math.cos(theta - 2 * math.pi * k / 3) for k in range(3)]
    return np.sort(np.array(roots))


def _bisect_positive_root(p: float, q: float, iters: int = 400) -> float:
    # Fujiwara bound on root magnitude
    hi = 2 * max(math.sqrt(abs(p)), abs(q / 2) ** (1 / 3))
    lo = 0.0
    if _cubic(hi, p, q) <= 0:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _cubic(mid, p, q) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_optimal_delay(params: ObjectiveParams) -> OptimalDelay:
    """Unique positive root of the optimality cubic, i.e. the ``dt53`` minimizing ``r_avg``.

    Falls back to bisection when the discriminant is too close to zero for the
    closed form to be reliable.
    """
    if not params.dt32 > 0:
        raise NoPositiveRoot("dt32 must be positive for a positive optimal delay")
    p, q = optimality_cubic(params)
    disc = (q / 2) ** 2 + (p / 3) ** 3
    scale = max((q / 2) ** 2, abs(p / 3) ** 3)
    if scale == 0:
        raise NoPositiveRoot("optimality cubic is degenerate")
    method = "cardano"
    if abs(disc) < _DISCRIMINANT_RTOL * scale:
        root = _bisect_positive_root(p, q)
        method = "bisection"
    else:
        positive = [r for r in depressed_cubic_real_roots(p, q) if r > 0]
        if not positive:
            raise NoPositiveRoot(f"no positive root for p={p!r}, q={q!r}")
        root = float(max(positive))
    return OptimalDelay(
        dt53_star=root,
        residual=_cubic(root, p, q),
        r_avg_at_star=r_avg(root, params),
        method=method,
        constant_term=q,
    )


def grid_argmin_r_avg(params: ObjectiveParams, grid: Sequence[Seconds]) -> Seconds:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    return float(grid[np.argmin(r_avg(grid, params))])
