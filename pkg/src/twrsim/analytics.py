"""Closed-form bias/variance models for SS-TWR and DS-TWR, and the DS-TWR CRLB."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from twrsim.errors import DegenerateInterval, SingularInformation
from twrsim.timebase import ArrayLike, Seconds, SecondsSq, check_finite

MAX_ABS_GAMMA_IJ = 2e-3
COND_LIMIT = 1e12

STATE_NAMES = ("tof", "origin", "tau_ij", "gamma_ij", "dt32_j", "dt53_j")
MEASUREMENT_NAMES = ("T1_i", "T2_j", "T3_j", "T4_i", "T5_j", "T6_i")


@dataclass(frozen=True)
class RelativeClock:
    """Offset and skew of clock i relative to clock j."""

    tau_ij: Seconds = 0.0
    gamma_ij: float = 0.0

    def __post_init__(self):
        check_finite("tau_ij", self.tau_ij)
        check_finite("gamma_ij", self.gamma_ij)
        if abs(self.gamma_ij) >= MAX_ABS_GAMMA_IJ:
            raise ValueError(f"|gamma_ij| must be below {MAX_ABS_GAMMA_IJ:g}")

    @classmethod
    def between(cls, clock_i, clock_j) -> "RelativeClock":
        return cls(clock_i.offset - clock_j.offset, clock_i.skew - clock_j.skew)


@dataclass(frozen=True)
class CrlbState:
    """Linearization point ``[tof, origin, tau_ij, gamma_ij, dt32_j, dt53_j]``."""

    tof: Seconds
    origin: Seconds
    rel: RelativeClock
    dt32_j: Seconds
    dt53_j: Seconds

    def __post_init__(self):
        if self.dt32_j <= 0 or self.dt53_j <= 0:
            raise ValueError("dt32_j and dt53_j must be positive")

    def as_vector(self) -> np.ndarray:
        return np.array([self.tof, self.origin, self.rel.tau_ij, self.rel.gamma_ij,
                         self.dt32_j, self.dt53_j], dtype=float)


@dataclass(frozen=True)
class CrlbResult:
    jacobian: np.ndarray
    fisher_inverse: np.ndarray
    tof_variance_bound: SecondsSq
    closed_form_bound: SecondsSq

    def report(self) -> str:
        lines = ["jacobian:"]
        for name, row in zip(MEASUREMENT_NAMES, self.jacobian):
            lines.append(f"  {name:5s} " + " ".join(f"{v: .12g}" for v in row))
        lines.append("fisher_inverse_diagonal:")
        for name, v in zip(STATE_NAMES, np.diag(self.fisher_inverse)):
            lines.append(f"  {name:8s} {v:.12g}")
        lines.append(f"tof_variance_bound_s2 {self.tof_variance_bound:.12g}")
        lines.append(f"closed_form_bound_s2 {self.closed_form_bound:.12g}")
        return "\n".join(lines)


def ss_bias(rel: RelativeClock, dt32: Seconds) -> Seconds:
    """Expected SS-TWR error, half the relative skew times the first response delay."""
    return 0.5 * rel.gamma_ij * dt32


def ss_variance(R: SecondsSq) -> SecondsSq:
    if R < 0:
        raise ValueError("R must be non-negative")
    return R


def ds_variance(R: SecondsSq, dt32: ArrayLike, dt53: ArrayLike) -> ArrayLike:
    """DS-TWR variance ``R (1 + rho + rho**2)`` with ``rho = dt32 / dt53``."""
    dt53 = np.asarray(dt53, dtype=float)
    if np.any(dt53 <= 0):
        raise DegenerateInterval("dt53 must be positive")
    rho = np.asarray(dt32, dtype=float) / dt53
    out = R * (1.0 + rho + rho * rho)
    return float(out) if np.ndim(out) == 0 else out


def ds_error_coefficients(dt32: ArrayLike, dt53: ArrayLike) -> np.ndarray:
    """Coefficients of eta1..eta6 in the linearized DS-TWR error.

    ``e = 0.5 * (rho*(eta5 - eta3 - eta6 + eta4) + eta4 - eta1 - eta3 + eta2)``;
    the result has shape ``(6,) + broadcast shape``.
    """
    rho = np.asarray(dt32, dtype=float) / np.asarray(dt53, dtype=float)
    one = np.ones_like(rho)
    # columns: eta1, eta2, eta3, eta4, eta5, eta6
    from_ratio = np.stack([0 * one, 0 * one, -rho, rho, rho, -rho])
    from_round_trip = np.stack([-one, one, -one, one, 0 * one, 0 * one])
    return 0.5 * (from_ratio + from_round_trip)


def brute_force_ds_variance(R: SecondsSq, dt32: ArrayLike, dt53: ArrayLike) -> ArrayLike:
    """DS-TWR variance by summing squared per-timestamp noise coefficients."""
    if np.any(np.asarray(dt53) <= 0):
        raise DegenerateInterval("dt53 must be positive")
    coeffs = ds_error_coefficients(dt32, dt53)
    out = R * np.sum(coeffs**2, axis=0)
    return float(out) if np.ndim(out) == 0 else out


# -- CRLB --------------------------------------------------------------------


def measurement_model(x: np.ndarray) -> np.ndarray:
    """Approximate timestamp model ``y(x)`` used to linearize the CRLB.

    Uses ``gamma_i * tof ~ 0`` and ``gamma_ij / (1 + gamma_j) ~ gamma_ij``.
    """
    tof, origin, tau, gamma, d32, d53 = x
    j_base = origin + tof - tau
    return np.array([
        origin,
        j_base,
        j_base + d32,
        origin + 2 * tof + (1 + gamma) * d32,
        j_base + d32 + d53,
        origin + 2 * tof + (1 + gamma) * (d32 + d53),
    ])


def exact_measurement_model(x: np.ndarray, gamma_j: float = 0.0) -> np.ndarray:
    """Noise-free static timestamps without the small-skew approximations.

    The absolute skew ``gamma_j`` is not part of the state and must be given.
    """
    tof, origin, tau, gamma, d32, d53 = x
    gamma_i = gamma + gamma_j
    # true-time intervals programmed in j's clock
    t2 = tof
    t3 = t2 + d32 / (1 + gamma_j)
    t4 = t3 + tof
    t5 = t3 + d53 / (1 + gamma_j)
    t6 = t5 + tof
    on_i = lambda t: origin + (1 + gamma_i) * t
    on_j = lambda t: origin - tau + (1 + gamma_j) * t
    return np.array([on_i(0.0), on_j(t2), on_j(t3), on_i(t4), on_j(t5), on_i(t6)])


def jacobian(state: CrlbState) -> np.ndarray:
    """Measurement Jacobian ``dy/dx`` at ``state``; rows T1_i..T6_i."""
    g1 = 1.0 + state.rel.gamma_ij
    d32, d53 = state.dt32_j, state.dt53_j
    return np.array([
        [0, 1, 0, 0, 0, 0],
        [1, 1, -1, 0, 0, 0],
        [1, 1, -1, 0, 1, 0],
        [2, 1, 0, d32, g1, 0],
        [1, 1, -1, 0, 1, 1],
        [2, 1, 0, d32 + d53, g1, g1],
    ], dtype=float)


def finite_difference_jacobian(
    fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, rel_step: float = 1e-8
) -> np.ndarray:
    """Central-difference Jacobian with per-component step ``rel_step * max(|x_k|, 1)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        h = rel_step * max(abs(x[k]), 1.0)
        e = np.zeros_like(x)
        e[k] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def inverse_information(C: np.ndarray, R: SecondsSq, scale: bool = True) -> np.ndarray:
    """``(C^T (R I)^-1 C)^-1`` via a Cholesky solve on column-equilibrated ``C``."""
    if R <= 0:
        raise ValueError("R must be positive")
    C = np.asarray(C, dtype=float)
    norms = np.linalg.norm(C, axis=0)
    if np.any(norms == 0):
        raise SingularInformation("Jacobian has an all-zero column")
    d = 1.0 / norms if scale else np.ones(C.shape[1])
    Cs = C * d
    F = Cs.T @ Cs
    cond = np.linalg.cond(F)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularInformation(f"information matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    try:
        factor = scipy.linalg.cho_factor(F)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc
    Finv = scipy.linalg.cho_solve(factor, np.eye(F.shape[0]))
    Finv = 0.5 * (Finv + Finv.T)
    return R * (d[:, None] * Finv * d[None, :])


def crlb_closed_form(gamma_ij: float, dt32: Seconds, dt53: Seconds, R: SecondsSq) -> SecondsSq:
    """Closed-form ToF entry of the inverse Fisher information."""
    g = gamma_ij
    return R * (g * g + 2 * g + 2) * (dt32**2 + dt32 * dt53 + dt53**2) / (2 * dt53**2)


def crlb(state: CrlbState, R: SecondsSq, scale: bool = True) -> CrlbResult:
    """Cramer-Rao bound on the ToF variance of any unbiased DS-TWR estimator."""
    C = jacobian(state)
    Finv = inverse_information(C, R, scale=scale)
    return CrlbResult(
        jacobian=C,
        fisher_inverse=Finv,
        tof_variance_bound=float(Finv[0, 0]),
        closed_form_bound=crlb_closed_form(state.rel.gamma_ij, state.dt32_j, state.dt53_j, R),
    )


def numeric_crlb(
    fn: Callable[[np.ndarray], np.ndarray], state: CrlbState, R: SecondsSq
) -> SecondsSq:
    """ToF bound for an arbitrary measurement model, via a finite-difference Jacobian."""
    C = finite_difference_jacobian(fn, state.as_vector())
    return float(inverse_information(C, R)[0, 0])
