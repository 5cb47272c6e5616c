"""Slope-dependent mobility a(theta) of the zero-temperature Ising interface.

Three modes are available:

* ``exact``     a(theta) = 1 / (2 (|cos theta| + |sin theta|)^2)
* ``mollified`` a convolved with a smooth compactly supported bump of
                half-width ``omega``; C-infinity, pi/2-periodic, 1-Lipschitz
* ``constant``  a(theta) = c, used to validate against isotropic solutions

Every evaluation folds the angle into [0, pi/2) first, so the pi/2
periodicity of the exact and mollified modes holds by construction.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

QUARTER = 0.5 * math.pi
TABLE_SIZE = 4096
_GL_ORDER = 48

KINDS = ("exact", "mollified", "constant")


def fold(theta):
    """Reduce angles into [0, pi/2)."""
    r = np.mod(theta, QUARTER)
    # np.mod can round up to the period itself for tiny negative inputs
    return np.where(r >= QUARTER, 0.0, r)


def exact_a(theta):
    t = fold(np.asarray(theta, dtype=float))
    s = np.cos(t) + np.sin(t)
    return 0.5 / (s * s)


def exact_da(theta):
    t = fold(np.asarray(theta, dtype=float))
    return -np.cos(2 * t) / (1.0 + np.sin(2 * t)) ** 2


def _bump(x):
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@functools.lru_cache(maxsize=32)
def _mollified_spline(omega: float) -> CubicSpline:
    """Tabulate a * bump_omega on a uniform grid over one period."""
    nodes, weights = np.polynomial.legendre.leggauss(_GL_ORDER)
    grid = np.linspace(0.0, QUARTER, TABLE_SIZE + 1)
    theta = grid[:-1]

    # (a * phi)(theta) = int phi(x) a(theta - x) dx over |x| < omega.
    # a has kinks at multiples of pi/2; split the x-range at the one kink
    # that can fall inside it (omega <= pi/8 < pi/4) so each piece is smooth.
    kink = theta - np.where(theta > 0.5 * QUARTER, QUARTER, 0.0)
    kink = np.clip(kink, -omega, omega)
    values = np.zeros_like(theta)
    norm = np.zeros_like(theta)
    for lo, hi in ((np.full_like(theta, -omega), kink), (kink, np.full_like(theta, omega))):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = mid[:, None] + half[:, None] * nodes[None, :]
        w = half[:, None] * weights[None, :]
        phi = _bump(x / omega)
        values += np.sum(w * phi * exact_a(theta[:, None] - x), axis=1)
        norm += np.sum(w * phi, axis=1)
    values /= norm
    return CubicSpline(grid, np.append(values, values[0]), bc_type="periodic")


@dataclass(frozen=True)
class AnisotropyProfile:
    """Mobility function used by the flow solver.

    Build instances with :meth:`exact`, :meth:`mollified` or :meth:`constant_speed`.
    """

    kind: str = "exact"
    omega: float = 0.0
    constant: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown anisotropy kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "mollified" and not (0.0 < self.omega <= math.pi / 8):
            raise ValueError(f"mollification width must lie in (0, pi/8], got {self.omega}")
        if self.kind == "constant" and not self.constant > 0:
            raise ValueError(f"constant mobility must be positive, got {self.constant}")

    @classmethod
    def exact(cls) -> "AnisotropyProfile":
        return cls("exact")

    @classmethod
    def mollified(cls, omega: float) -> "AnisotropyProfile":
        return cls("mollified", omega=float(omega))

    @classmethod
    def constant_speed(cls, c: float = 1.0) -> "AnisotropyProfile":
        return cls("constant", constant=float(c))

    def __call__(self, theta):
        return evaluate(self, theta)

    @property
    def bounds(self) -> tuple[float, float]:
        """(a_min, a_max) over all angles."""
        if self.kind == "constant":
            return self.constant, self.constant
        if self.kind == "exact":
            return 0.25, 0.5
        spline = _mollified_spline(self.omega)
        grid = np.linspace(0.0, QUARTER, 8 * TABLE_SIZE)
        v = spline(grid)
        return float(v.min()), float(v.max())

    def describe(self) -> str:
        if self.kind == "mollified":
            return f"mollified:{self.omega!r}"
        if self.kind == "constant":
            return f"constant:{self.constant!r}"
        return "exact"


def evaluate(profile: AnisotropyProfile, theta):
    """a(theta) for the given profile; accepts scalars or arrays."""
    theta = np.asarray(theta, dtype=float)
    if profile.kind == "constant":
        out = np.full(theta.shape, profile.constant)
    elif profile.kind == "exact":
        out = exact_a(theta)
    else:
        out = _mollified_spline(profile.omega)(fold(theta))
    return out if out.ndim else float(out)


def evaluate_derivative(profile: AnisotropyProfile, theta):
    """d a / d theta.

    The exact mobility is not differentiable at multiples of pi/2; asking
    for its derivative there raises ``ValueError``.
    """
    theta = np.asarray(theta, dtype=float)
    if profile.kind == "constant":
        out = np.zeros(theta.shape)
    elif profile.kind == "exact":
        t = fold(theta)
        eps = 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(theta))
        if np.any((t < eps) | (QUARTER - t < eps)):
            raise ValueError("exact mobility is not differentiable at multiples of pi/2")
        out = exact_da(theta)
    else:
        out = _mollified_spline(profile.omega)(fold(theta), 1)
    return out if out.ndim else float(out)


def total_integral(profile: AnisotropyProfile) -> float:
    """Integral of a over [0, 2 pi]."""
    if profile.kind == "constant":
        return 2 * math.pi * profile.constant
    if profile.kind == "mollified":
        spline = _mollified_spline(profile.omega)
        return 4.0 * float(spline.integrate(0.0, QUARTER))
    val, _ = quad(lambda t: float(exact_a(t)), 0.0, QUARTER, epsabs=1e-14, epsrel=1e-13)
    return 4.0 * val


def default_omega(n_markers: int) -> float:
    """Mollification width tied to the angular resolution of an N-marker curve."""
    return min(4.0 * 2 * math.pi / n_markers, math.pi / 8)


def stepping_profile(profile: AnisotropyProfile, n_markers: int) -> AnisotropyProfile:
    """Profile actually fed to the time stepper.

    The exact mobility has kinks at multiples of pi/2, so stepping always
    uses the mollified version at the default width.
    """
    if profile.kind == "exact":
        return AnisotropyProfile.mollified(default_omega(n_markers))
    return profile


def from_config(kind: str, omega: float | None = None, constant: float | None = None) -> AnisotropyProfile:
    if kind == "exact":
        return AnisotropyProfile.exact()
    if kind == "mollified":
        if omega is None:
            raise ValueError("anisotropy.omega is required for the mollified profile")
        return AnisotropyProfile.mollified(omega)
    if kind == "constant":
        return AnisotropyProfile.constant_speed(1.0 if constant is None else constant)
    raise ValueError(f"unknown anisotropy kind {kind!r}")
