"""Short-time Stefan solver built as the fixed point of a map on collar boundary data.

Work with ``rho = f_x``. Given collar values ``phi = (phi1(t), phi2(t))`` at the
points ``c1 = l0 + 2 lbar`` and ``c2 = r0 - 2 lbar`` (``lbar = 1 / (4 max|rho0'|)``):

1. solve two one-sided problems, ``rho = 1`` at the moving end ``l(t)`` with
   ``l' = -rho_x(l)``, ``rho = phi1`` at ``c1`` (and the mirror problem on the right);
2. solve the heat equation for ``rho`` on the contracting domain ``(l(t), r(t))``
   with ``rho = 1`` at ``l`` and ``-1`` at ``r``;
3. read that solution back at ``c1`` and ``c2``.

For short horizons this map is a contraction; its fixed point gives the
Stefan solution, and ``f`` is recovered by integrating ``rho`` from ``l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..lattice import Profile
from .front_tracking import StefanRun, StefanState, _apply, _thomas, check_stefan_data, count_sign_changes

__all__ = ["FixedPointReport", "stefan_fixed_point", "collar_width"]


@njit(cache=True)
def _cn_dirichlet(F, w0, w1, ldot, rdot, dy, dt, left, right):
    """One Crank-Nicolson step in mapped coordinates with Dirichlet data at the new level."""
    N = F.size - 1
    n = N - 1
    rhs = F + 0.5 * dt * _apply(F, w0, ldot, rdot, dy)
    th = 0.5 * dt
    alpha = 1.0 / (dy * dy * w1 * w1)
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        j = i + 1
        y = j * dy
        beta = ((1.0 - y) * ldot + y * rdot) / (2.0 * dy * w1)
        lower[i] = -th * (alpha - beta)
        diag[i] = 1.0 + 2.0 * th * alpha
        upper[i] = -th * (alpha + beta)
        b[i] = rhs[j]
    b[0] -= lower[0] * left
    b[n - 1] -= upper[n - 1] * right
    lower[0] = 0.0
    upper[n - 1] = 0.0
    out = np.empty(N + 1)
    out[1:N] = _thomas(lower, diag, upper, b)
    out[0] = left
    out[N] = right
    return out


def _slope0(R, w, dy):
    """``rho_x`` at the moving end from a second-order one-sided stencil."""
    return (-3.0 * R[0] + 4.0 * R[1] - R[2]) / (2.0 * dy) / w


def _one_sided(rho0, x0, c, phi, dt, n_cells, newton_tol=1e-14):
    """Left one-sided problem on ``(l(t), c)``; returns ``l`` on the time grid."""
    dy = 1.0 / n_cells
    R = rho0(x0 + (c - x0) * np.linspace(0.0, 1.0, n_cells + 1))
    R[0] = 1.0
    R[-1] = phi[0]
    l = np.empty(phi.size)
    l[0] = x0
    speed = -_slope0(R, c - x0, dy)
    for n in range(1, phi.size):
        lo = l[n - 1]
        w0 = c - lo
        s0 = _slope0(R, w0, dy)

        def residual(L):
            w1 = c - L
            ldot = (L - lo) / dt
            Rn = _cn_dirichlet(R, w0, w1, ldot, 0.0, dy, dt, 1.0, phi[n])
            return ldot + 0.5 * (s0 + _slope0(Rn, w1, dy)), Rn

        # secant iteration on the new boundary position
        a = lo + dt * speed
        fa, Rn = residual(a)
        b = a + 1e-9 * max(w0, 1.0)
        for _ in range(50):
            fb, Rn = residual(b)
            if fb == fa:
                break
            a, b, fa = b, b - fb * (b - a) / (fb - fa), fb
            if abs(b - a) <= newton_tol * max(w0, 1.0):
                fb, Rn = residual(b)
                break
        if not c - b > 0:
            raise RuntimeError("one-sided boundary reached the collar point")
        l[n] = b
        speed = (b - lo) / dt
        R = Rn
    return l


def _contracting_heat(rho0, l, r, dt, n_cells):
    """``rho`` on the prescribed domain ``(l(t), r(t))``, values 1 and -1 at the ends."""
    dy = 1.0 / n_cells
    y = np.linspace(0.0, 1.0, n_cells + 1)
    R = rho0(l[0] + (r[0] - l[0]) * y)
    R[0], R[-1] = 1.0, -1.0
    out = np.empty((l.size, n_cells + 1))
    out[0] = R
    for n in range(1, l.size):
        ldot = (l[n] - l[n - 1]) / dt
        rdot = (r[n] - r[n - 1]) / dt
        R = _cn_dirichlet(R, r[n - 1] - l[n - 1], r[n] - l[n], ldot, rdot, dy, dt, 1.0, -1.0)
        out[n] = R
    return out


def collar_width(f0: Profile) -> float:
    """``1 / (4 max|f0''|)``, estimated from second differences of the grid values."""
    d2 = np.diff(f0.values, 2) / f0.dx ** 2
    m = float(np.max(np.abs(d2)))
    if m == 0:
        raise ValueError("f0 has no curvature; collar width is unbounded")
    return 1.0 / (4.0 * m)


@dataclass
class FixedPointReport:
    run: StefanRun
    iterations: int
    increments: np.ndarray  # sup-norm change of the collar data per iteration
    contraction_factor: float  # largest ratio of successive increments
    collar: float
    times: np.ndarray
    l: np.ndarray
    r: np.ndarray


def stefan_fixed_point(
    f0: Profile,
    t0: float,
    tolerance: float = 1e-10,
    n_steps: int = 400,
    n_cells: int = 400,
    max_iter: int = 60,
    record_every: int = 40,
) -> FixedPointReport:
    """Iterate the collar map to its fixed point on ``[0, t0]`` (slope-1 problem).

    Raises ``RuntimeError`` when the iterates stop contracting.
    """
    check_stefan_data(f0, 1.0)
    if not t0 > 0:
        raise ValueError("horizon must be positive")
    l0, r0 = f0.a, f0.b
    lbar = collar_width(f0)
    c1, c2 = l0 + 2 * lbar, r0 - 2 * lbar
    if not c1 < c2:
        raise ValueError("collars overlap")
    rho_prof = Profile(l0, r0, np.concatenate([[1.0], 0.5 * (f0.slopes()[1:] + f0.slopes()[:-1]), [-1.0]]))
    mirror = Profile(-r0, -l0, -rho_prof.values[::-1])
    dt = t0 / n_steps
    times = np.linspace(0.0, t0, n_steps + 1)
    phi1 = np.full(times.size, rho_prof(c1))
    phi2 = np.full(times.size, rho_prof(c2))
    increments = []
    grid_y = np.linspace(0.0, 1.0, n_cells + 1)
    for it in range(1, max_iter + 1):
        l = _one_sided(rho_prof, l0, c1, phi1, dt, n_cells)
        r = -_one_sided(mirror, -r0, -c2, -phi2, dt, n_cells)
        rho = _contracting_heat(rho_prof, l, r, dt, n_cells)
        new1 = np.array([np.interp((c1 - l[n]) / (r[n] - l[n]), grid_y, rho[n]) for n in range(times.size)])
        new2 = np.array([np.interp((c2 - l[n]) / (r[n] - l[n]), grid_y, rho[n]) for n in range(times.size)])
        inc = max(np.max(np.abs(new1 - phi1)), np.max(np.abs(new2 - phi2)))
        increments.append(inc)
        phi1, phi2 = new1, new2
        if len(increments) >= 3 and increments[-1] > increments[-2] > increments[-3]:
            raise RuntimeError(f"collar map is not contracting (increments {increments[-3:]})")
        if inc < tolerance:
            break
    inc = np.asarray(increments)
    ratios = inc[1:] / inc[:-1] if inc.size > 1 else np.array([0.0])
    ratios = ratios[inc[:-1] > 1e-12] if inc.size > 1 else ratios
    factor = float(ratios.max()) if ratios.size else 0.0

    # final sweep with the converged data
    l = _one_sided(rho_prof, l0, c1, phi1, dt, n_cells)
    r = -_one_sided(mirror, -r0, -c2, -phi2, dt, n_cells)
    rho = _contracting_heat(rho_prof, l, r, dt, n_cells)
    states = []
    series = {c: [] for c in StefanRun.CSV_COLUMNS + ("k_min",)}
    for n in range(times.size):
        w = r[n] - l[n]
        dx = w / n_cells
        R = rho[n]
        F = np.concatenate([[0.0], np.cumsum(0.5 * (R[1:] + R[:-1]) * dx)])
        k = -np.gradient(R, dx)
        series["t"].append(times[n])
        series["l"].append(l[n])
        series["r"].append(r[n])
        series["area"].append(float(np.trapezoid(F, dx=dx)))
        series["k_max"].append(float(np.max(np.abs(k))))
        series["k_at_l"].append(k[0])
        series["k_at_r"].append(k[-1])
        series["inflections"].append(count_sign_changes(k))
        series["k_min"].append(float(np.min(k)))
        if n % record_every == 0 or n == times.size - 1:
            states.append(StefanState(times[n], l[n], r[n], Profile(l[n], r[n], F), Profile(l[n], r[n], k)))
    run = StefanRun(
        states=states,
        series={c: np.asarray(v) for c, v in series.items()},
        verdict="horizon",
        n_cells=n_cells,
        slope=1.0,
        initial=states[0],
        meta={"solver": "fixed-point", "t0": t0},
    )
    return FixedPointReport(run, len(increments), inc, factor, lbar, times, l, r)
