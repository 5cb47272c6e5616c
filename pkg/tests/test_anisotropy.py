import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dropletflow import anisotropy as an
from dropletflow.anisotropy import AnisotropyProfile

EXACT = AnisotropyProfile.exact()
MOLL = AnisotropyProfile.mollified(0.05)
angles = st.floats(-50.0, 50.0, allow_nan=False)


def test_exact_values():
    assert an.evaluate(EXACT, 0.0) == 0.5
    assert an.evaluate(EXACT, math.pi / 4) == pytest.approx(0.25, abs=1e-15)
    assert an.evaluate(AnisotropyProfile.constant_speed(1.0), 2.7) == 1.0


def test_exact_matches_formula_on_grid():
    th = np.linspace(-7, 7, 2001)
    ref = 1 / (2 * (np.abs(np.cos(th)) + np.abs(np.sin(th))) ** 2)
    assert np.max(np.abs(an.evaluate(EXACT, th) - ref)) < 1e-14


@given(angles, st.integers(-8, 8))
def test_quarter_periodicity(t, k):
    # t + k pi/2 is itself rounded, so the shift is exact only up to that rounding
    s = t + k * math.pi / 2
    for p in (EXACT, MOLL):
        assert p(an.fold(t)) == p(t)
        assert abs(p(s) - p(t)) <= 8 * np.spacing(abs(s) + abs(t) + 2)


@given(angles, angles)
def test_lipschitz(t1, t2):
    for p in (EXACT, MOLL):
        assert abs(p(t1) - p(t2)) <= abs(t1 - t2) + 1e-12


@pytest.mark.parametrize("omega", [0.02, 0.05, 0.2, math.pi / 8])
def test_mollified_close_and_bounded(omega):
    p = AnisotropyProfile.mollified(omega)
    th = np.linspace(0, 2 * np.pi, 20001)
    v = p(th)
    assert np.max(np.abs(v - EXACT(th))) <= omega
    assert v.min() >= 0.25 - omega and v.max() <= 0.5 + omega
    lo, hi = p.bounds
    assert 0.25 - omega <= lo <= hi <= 0.5 + omega


def test_total_integral():
    assert abs(an.total_integral(EXACT) - 2.0) < 1e-9
    assert an.total_integral(AnisotropyProfile.constant_speed(1.0)) == pytest.approx(2 * math.pi)
    # independent oracle: plain trapezoid on the spline values
    th = np.linspace(0, 2 * np.pi, 200001)
    assert an.total_integral(MOLL) == pytest.approx(np.trapezoid(MOLL(th), th), abs=1e-8)
    assert abs(an.total_integral(MOLL) - 2.0) <= 0.05 * 2 * math.pi


def test_derivative_examples():
    assert an.evaluate_derivative(AnisotropyProfile.constant_speed(1.0), 1.2) == 0
    assert abs(an.evaluate_derivative(MOLL, math.pi / 4)) < 1e-8
    h = 1e-6
    fd = (EXACT(math.pi / 8 + h) - EXACT(math.pi / 8 - h)) / (2 * h)
    assert an.evaluate_derivative(EXACT, math.pi / 8) == pytest.approx(fd, abs=1e-6)


def test_derivative_rejected_at_kinks():
    for k in range(-3, 4):
        with pytest.raises(ValueError):
            an.evaluate_derivative(EXACT, k * math.pi / 2)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(0)
    omega = 0.05
    th = rng.uniform(0, 2 * np.pi, 4000)
    away = np.abs(np.array([math.remainder(t, math.pi / 2) for t in th])) > 2 * omega
    th = th[away][:1000]
    h = 1e-6
    for p in (EXACT, MOLL):
        fd = (p(th + h) - p(th - h)) / (2 * h)
        assert np.max(np.abs(an.evaluate_derivative(p, th) - fd)) < 1e-6
    assert np.max(np.abs(an.evaluate_derivative(MOLL, np.linspace(0, 7, 5000)))) <= 1.0


def test_heat_chart_quarter():
    # in a pi/4 frame a(arctan u + pi/4) / (1 + u^2) = 1/4 for |u| <= 1
    u = np.linspace(-1, 1, 101)
    assert np.allclose(EXACT(np.arctan(u) + math.pi / 4) / (1 + u * u), 0.25, atol=1e-15)


def test_config_and_validation():
    assert an.from_config("exact") == EXACT
    assert an.from_config("mollified", 0.05) == MOLL
    with pytest.raises(ValueError):
        an.from_config("mollified")
    with pytest.raises(ValueError):
        AnisotropyProfile.mollified(1.0)
    with pytest.raises(ValueError):
        AnisotropyProfile("wulff")
    assert an.stepping_profile(EXACT, 512) == AnisotropyProfile.mollified(an.default_omega(512))
    assert an.stepping_profile(MOLL, 512) is MOLL


@settings(max_examples=25)
@given(st.floats(0.01, math.pi / 8))
def test_mollifier_preserves_integral(omega):
    assert an.total_integral(AnisotropyProfile.mollified(omega)) == pytest.approx(2.0, abs=1e-9)
