"""Small analytic helpers around the free-boundary problem."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..lattice import Profile
from .heat import HeatSeries

__all__ = ["tstar", "pedestal", "agmon_check", "SlopeCheck", "heat_boundary_slope"]


def tstar(f0: Profile) -> float:
    """Time at which an area decreasing at rate 2 vanishes: half the integral of ``f0``."""
    return 0.5 * f0.integral()


def pedestal(f: Profile, l: float, r: float, delta_bar: float) -> Profile:
    """Lift ``f`` by ``delta_bar`` on ``(l, r)`` and close it with slope-one ramps of width ``delta_bar``.

    The result lives on the grid of ``f``; ramps are exact when ``l - delta_bar``,
    ``l``, ``r`` and ``r + delta_bar`` are grid nodes.
    """
    if delta_bar < 0:
        raise ValueError("delta_bar must be non-negative")
    if not l < r:
        raise ValueError("empty support")
    tol = 1e-12 * max(1.0, abs(f.a), abs(f.b))
    if l - delta_bar < f.a - tol or r + delta_bar > f.b + tol:
        raise ValueError("pedestal leaves the domain of the profile")
    if delta_bar == 0:
        return f
    x = f.x
    v = np.array(f.values, dtype=float)
    inside = (x >= l) & (x <= r)
    v[inside] += delta_bar
    left = (x >= l - delta_bar) & (x < l)
    right = (x > r) & (x <= r + delta_bar)
    v[left] = x[left] - (l - delta_bar)
    v[right] = (r + delta_bar) - x[right]
    return Profile(f.a, f.b, v)


def agmon_check(gamma: Profile, tail_tol: float = 1e-8) -> float:
    """Return ``4 (int gamma^2)(int gamma_x^2) - max|gamma|^4`` for a half-line profile.

    The profile stands for a function on ``[a, inf)`` truncated at ``b``; it must
    have decayed there. Integrals are exact for the piecewise-linear interpolant.
    """
    v = gamma.values
    peak = float(np.max(np.abs(v)))
    if abs(v[-1]) > tail_tol * max(peak, 1.0):
        raise ValueError("profile has not decayed at the truncation point")
    a, b = v[:-1], v[1:]
    l2 = float(np.sum(a * a + a * b + b * b) * gamma.dx / 3.0)
    h1 = float(np.sum((b - a) ** 2) / gamma.dx)
    return 4.0 * l2 * h1 - peak ** 4


@dataclass(frozen=True)
class SlopeCheck:
    min_slope_left: float
    min_slope_right: float
    slope_bound: float
    area: float
    area_bound: float

    @property
    def slope_ok(self) -> bool:
        return min(self.min_slope_left, self.min_slope_right) >= self.slope_bound

    @property
    def area_ok(self) -> bool:
        return self.area >= self.area_bound

    @property
    def passed(self) -> bool:
        return self.slope_ok and self.area_ok


def heat_boundary_slope(f0: Profile, t: float, delta_bar: float, modes: int = 4096,
                        slope_tol: float = 0.05, n_probe: int = 201, area_tol: float = 1e-6) -> SlopeCheck:
    """Check that Dirichlet heat flow keeps the inward slope near 1 close to the ends.

    On the collars of width ``delta_bar / 2`` the inward slope of the solution at
    time ``t`` must be at least ``1 - exp(-delta_bar^2 / 16 t)``, and the area may
    not have dropped by more than ``2 t (1 + exp(-delta_bar^2 / 16 t))``, up to the
    quadrature tolerance ``area_tol``.
    """
    if t < 0:
        raise ValueError("negative time")
    if not f0.is_lipschitz(1.0, tol=1e-6):
        raise ValueError("initial profile is not 1-Lipschitz")
    sl = f0.slopes()
    if abs(sl[0] - 1) > slope_tol or abs(sl[-1] + 1) > slope_tol:
        raise ValueError("initial profile does not leave the ends with slopes +-1")
    if not 0 < delta_bar <= 0.5 * (f0.b - f0.a):
        raise ValueError("collar width out of range")
    leak = math.exp(-delta_bar ** 2 / (16 * t)) if t > 0 else 0.0
    bound = 1.0 - leak
    if t == 0:
        x = f0.x[:-1]
        left = float(np.min(sl[x < f0.a + delta_bar / 2]))
        right = float(np.min(-sl[x + f0.dx > f0.b - delta_bar / 2]))
        return SlopeCheck(left, right, bound, f0.integral(), f0.integral())
    series = HeatSeries(f0, modes)
    xl = np.linspace(f0.a, f0.a + delta_bar / 2, n_probe)
    xr = np.linspace(f0.b - delta_bar / 2, f0.b, n_probe)
    left = float(np.min(series.derivative(xl, t)))
    right = float(np.min(-series.derivative(xr, t)))
    prof = series.profile(t, max(f0.n_cells, 2048))
    return SlopeCheck(left, right, bound, prof.integral(), f0.integral() - 2 * t * (1 + leak) - area_tol)
