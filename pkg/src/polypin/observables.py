"""Exact path functionals: area, Fourier mode, contacts, generator drift and bracket.

Drifts are computed by enumerating every legal flip with its rate, never by
sampling, so they can serve as oracles for the stochastic engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PinningParameter, TrajectoryRecord, flip_rate
from .lattice import LatticePath, excursions

__all__ = [
    "DriftReport",
    "MartingaleSeries",
    "contacts",
    "area",
    "windowed_area",
    "generator_drift_area",
    "martingale_bracket_rate",
    "fourier",
    "kappa",
    "fourier_weights",
    "martingale_residual",
]


@dataclass(frozen=True)
class DriftReport:
    """Exact ``(LA)(eta)`` with its per-flip contributions ``(x, rate, dA)``."""

    value: float
    excursion_count_ge4: int
    contributions: tuple

    def to_csv(self) -> str:
        lines = ["x,rate,delta_area,contribution"]
        for x, rate, da in self.contributions:
            lines.append(f"{x},{float(rate)!r},{da},{float(rate * da)!r}")
        return "\n".join(lines) + "\n"


def _require_walled(path: LatticePath):
    if not path.walled:
        raise ValueError("this observable is defined for walled paths")


def contacts(path: LatticePath) -> int:
    """Number of interior zeros."""
    _require_walled(path)
    return int(np.count_nonzero(path.heights[1:-1] == 0))


def windowed_area(path: LatticePath, x_l: int, x_r: int) -> float:
    """Integral of ``max(eta, 1)`` (piecewise-linear interpolation) over ``[x_l, x_r]``.

    On a lattice path ``max(eta, 1)`` is linear on every unit cell, so the
    trapezoid rule is exact.
    """
    _require_walled(path)
    L = path.L
    if not -L <= x_l < x_r <= L:
        raise ValueError(f"window [{x_l}, {x_r}] is empty or leaves [-{L}, {L}]")
    v = np.maximum(path.heights[x_l + L: x_r + L + 1], 1)
    return float(v[1:-1].sum() + 0.5 * (v[0] + v[-1]))


def area(path: LatticePath) -> float:
    """``A(eta) = integral of max(eta, 1)`` over ``[-L, L]``; equals ``2L`` on the minimal path."""
    return windowed_area(path, -path.L, path.L)


def _flip_area_change(path: LatticePath, x: int) -> int:
    c = path[x]
    new = 2 * path[x - 1] - c
    return max(new, 1) - max(c, 1)


def _legal_flips(path: LatticePath, lam: PinningParameter):
    for x in range(-path.L + 1, path.L):
        if path[x - 1] != path[x + 1]:
            continue
        rate = flip_rate(path, x, lam)
        if rate > 0:
            yield x, rate, _flip_area_change(path, x)


def generator_drift_area(path: LatticePath, lam="inf") -> DriftReport:
    """Exact generator applied to the area: sum over flips of rate times area change."""
    _require_walled(path)
    lam = PinningParameter.parse(lam)
    contrib = tuple(_legal_flips(path, lam))
    value = float(sum(rate * da for _, rate, da in contrib))
    n_long = sum(1 for e in excursions(path) if e.length >= 4)
    return DriftReport(value, n_long, contrib)


def martingale_bracket_rate(path: LatticePath, lam="inf") -> float:
    """``F(eta) = sum over flips of rate * (dA)^2``; bounded by ``8L`` in the sticky case."""
    _require_walled(path)
    lam = PinningParameter.parse(lam)
    return float(sum(rate * da * da for _, rate, da in _legal_flips(path, lam)))


def fourier_weights(L: int) -> np.ndarray:
    """``g(x) = cos(x pi / 2L)`` at ``x = -L, ..., L``."""
    x = np.arange(-L, L + 1)
    return np.cos(x * math.pi / (2 * L))


def fourier(path: LatticePath) -> float:
    """``Phi(eta) = sum_x cos(x pi / 2L) eta(x)``."""
    return float(fourier_weights(path.L) @ path.heights)


def kappa(L: int) -> float:
    """Eigenvalue of the discrete Laplacian for ``g``: ``2 (1 - cos(pi / 2L))``."""
    if L < 1:
        raise ValueError("L must be positive")
    # 1 - cos(a) = 2 sin^2(a/2) avoids cancellation at large L
    return 4.0 * math.sin(math.pi / (4 * L)) ** 2


@dataclass(frozen=True)
class MartingaleSeries:
    """``M_t`` on the sampling grid together with the compensator of its square."""

    times: np.ndarray  # microscopic
    values: np.ndarray
    bracket: np.ndarray  # integral of F up to each time
    max_abs: float  # sup over all event times, not just the grid


def martingale_residual(record: TrajectoryRecord) -> MartingaleSeries:
    """``M_t = A(t) - A(0) - int_0^t LA ds`` read from a trajectory record.

    The engine integrates the drift exactly between events, so the only
    requirement is that at least one sample time was requested.
    """
    if record.observables.shape[0] == 0:
        raise ValueError("record has no observable samples; request sample_times")
    L2 = float(record.config.L) ** 2
    return MartingaleSeries(
        times=np.asarray(record.config.sample_times) * L2,
        values=record.column("martingale").copy(),
        bracket=record.column("bracket_integral").copy(),
        max_abs=record.max_abs_martingale,
    )
