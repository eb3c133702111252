import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twrsim import (
    DegenerateInterval,
    NoPositiveRoot,
    ObjectiveParams,
    ds_variance,
    grid_argmin_r_avg,
    optimality_cubic,
    r_avg,
    solve_optimal_delay,
)
from twrsim.optimizer import depressed_cubic_real_roots, measurement_rate

from conftest import R_REF

# Frozen from 200-step bisection of the cubic on [1e-6, 1e-1] at 50 digits.
ROOT_DEFAULT = 1.92966019376172e-3  # dt32=0.35 ms, T=7.2 ms
ROOT_T0 = 6.19252323983521e-4  # dt32=0.35 ms, T=0
ROOT_LONG_DT32 = 5.90463999545203e-3  # dt32=2 ms, T=7.2 ms


def bisect_cubic(dt32, T, lo=1e-6, hi=1e-1):
    f = lambda t: t**3 - dt32 * (T + 2 * dt32) * t - 2 * dt32**2 * (T + dt32)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if f(mid) > 0 else (mid, hi)
    return 0.5 * (lo + hi)


def test_r_avg_reference_value():
    p = ObjectiveParams(3.5e-4, 7.2e-3, R_REF)
    assert r_avg(1.9e-3, p) == pytest.approx(8.01197700831025e-23, rel=1e-12)


def test_r_avg_linear_tail():
    p = ObjectiveParams(3.5e-4, 7.2e-3, 1.0)
    assert r_avg(1e3, p) / 1e3 == pytest.approx(1.0, rel=1e-5)


def test_r_avg_explodes_near_zero():
    p = ObjectiveParams(3.5e-4, 7.2e-3, 1.0)
    values = r_avg(np.array([1e-5, 1e-7, 1e-9]), p)
    assert np.all(np.diff(values) > 0) and values[-1] > 1e8


def test_r_avg_rejects_nonpositive():
    with pytest.raises(DegenerateInterval):
        r_avg(0.0, ObjectiveParams(3.5e-4, 7.2e-3, 1.0))


@pytest.mark.parametrize("dt32, T, p, q", [
    (3.5e-4, 7.2e-3, -2.765e-6, -1.84975e-9),
    (2e-3, 7.2e-3, -2.24e-5, -7.36e-8),
])
def test_cubic_coefficients(dt32, T, p, q):
    got = optimality_cubic(ObjectiveParams(dt32, T, 1.0))
    assert got == pytest.approx((p, q), rel=1e-12)


def test_cubic_coefficients_vanish_with_dt32():
    p, q = optimality_cubic(ObjectiveParams(1e-15, 7.2e-3, 1.0))
    assert abs(p) < 1e-16 and abs(q) < 1e-31


def test_cubic_coefficients_independent_of_R():
    assert optimality_cubic(ObjectiveParams(3.5e-4, 7.2e-3, 1.0)) == optimality_cubic(
        ObjectiveParams(3.5e-4, 7.2e-3, 1e-21))


@pytest.mark.parametrize("dt32, T, root", [
    (3.5e-4, 7.2e-3, ROOT_DEFAULT),
    (3.5e-4, 0.0, ROOT_T0),
    (2e-3, 7.2e-3, ROOT_LONG_DT32),
])
def test_optimal_delay_matches_bisection(dt32, T, root):
    opt = solve_optimal_delay(ObjectiveParams(dt32, T, R_REF))
    assert opt.dt53_star == pytest.approx(root, rel=1e-12)
    assert opt.dt53_star == pytest.approx(bisect_cubic(dt32, T), rel=1e-12)
    assert opt.relative_residual < 1e-9
    assert opt.r_avg_at_star == pytest.approx(r_avg(opt.dt53_star, ObjectiveParams(dt32, T, R_REF)))


def test_default_optimal_delay_about_1_9_ms():
    opt = solve_optimal_delay(ObjectiveParams(3.5e-4, 7.2e-3, R_REF))
    assert round(opt.dt53_star * 1e3, 1) == 1.9


def test_optimal_delay_matches_grid():
    p = ObjectiveParams(2e-3, 7.2e-3, R_REF)
    grid = np.geomspace(1e-5, 1e-1, 10**4)
    star = solve_optimal_delay(p).dt53_star
    step = math.log(grid[1] / grid[0])
    assert abs(math.log(grid_argmin_r_avg(p, grid) / star)) <= step


def test_grid_singleton():
    p = ObjectiveParams(3.5e-4, 7.2e-3, 1.0)
    assert grid_argmin_r_avg(p, [1.23e-3]) == 1.23e-3


def test_grid_tail_is_increasing():
    p = ObjectiveParams(3.5e-4, 7.2e-3, 1.0)
    star = solve_optimal_delay(p).dt53_star
    tail = np.geomspace(10 * star, 100 * star, 50)
    assert grid_argmin_r_avg(p, tail) == tail[0]


def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        grid_argmin_r_avg(ObjectiveParams(3.5e-4, 7.2e-3, 1.0), [])


def test_no_positive_root_when_dt32_slips_through():
    p = ObjectiveParams.__new__(ObjectiveParams)
    for k, v in dict(dt32=0.0, processing_T=7.2e-3, R=1.0).items():
        object.__setattr__(p, k, v)
    with pytest.raises(NoPositiveRoot):
        solve_optimal_delay(p)


def test_three_real_roots_branch():
    # (t-1)(t-2)(t+3) = t^3 - 7t + 6
    np.testing.assert_allclose(depressed_cubic_real_roots(-7.0, 6.0), [-3.0, 1.0, 2.0], rtol=1e-12)


def test_single_real_root_branch():
    np.testing.assert_allclose(depressed_cubic_real_roots(1.0, -2.0), [1.0], rtol=1e-12)


def test_measurement_rate():
    assert measurement_rate(1.9e-3, 3.5e-4, 7.2e-3) == 105


params = st.builds(
    ObjectiveParams,
    dt32=st.floats(1e-5, 1e-2),
    processing_T=st.floats(0, 5e-2),
    R=st.floats(1e-24, 1e-18),
)


@settings(max_examples=300, deadline=None)
@given(p=params)
def test_stationary_minimum(p):
    opt = solve_optimal_delay(p)
    t = opt.dt53_star
    h = 1e-4 * t
    f = lambda x: r_avg(x, p) / p.R
    deriv = (f(t + h) - f(t - h)) / (2 * h)
    assert abs(deriv) < 1e-6 * f(t) / t
    assert f(t + h) - 2 * f(t) + f(t - h) > 0


@settings(max_examples=200, deadline=None)
@given(p=params)
def test_root_independent_of_R(p):
    a = solve_optimal_delay(p).dt53_star
    b = solve_optimal_delay(ObjectiveParams(p.dt32, p.processing_T, 1000 * p.R)).dt53_star
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(p=params)
def test_single_sign_change(p):
    pc, qc = optimality_cubic(p)
    star = solve_optimal_delay(p).dt53_star
    grid = np.geomspace(star * 1e-4, star * 1e4, 2001)
    positive = (grid**3 + pc * grid + qc) > 0
    assert np.count_nonzero(np.diff(positive)) == 1


@settings(max_examples=200, deadline=None)
@given(p=params, bump=st.floats(1.01, 3.0))
def test_root_monotone_in_T_and_dt32(p, bump):
    base = solve_optimal_delay(p).dt53_star
    longer_T = solve_optimal_delay(ObjectiveParams(p.dt32, p.processing_T * bump + 1e-6, p.R))
    longer_dt32 = solve_optimal_delay(ObjectiveParams(p.dt32 * bump, p.processing_T, p.R))
    assert longer_T.dt53_star > base
    assert longer_dt32.dt53_star > base


def test_bisection_fallback_branch(monkeypatch):
    import twrsim.optimizer as opt_mod

    monkeypatch.setattr(opt_mod, "_DISCRIMINANT_RTOL", 10.0)
    opt = opt_mod.solve_optimal_delay(ObjectiveParams(3.5e-4, 7.2e-3, 1.0))
    assert opt.method == "bisection"
    assert opt.dt53_star == pytest.approx(ROOT_DEFAULT, rel=1e-12)
