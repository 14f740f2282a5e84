"""Continuous-time heat-bath corner-flip dynamics, with or without a wall.

Every interior site carries a Poisson clock of rate 2. When a site rings it
draws a uniform ``u`` and, if both neighbours sit at a common height
``a``, resets its own height to ``a - 1`` when ``u < p_down(a)`` and to ``a + 1``
otherwise. With

* ``p_down(a) = 1/2`` away from the wall,
* ``p_down(1) = lam / (1 + lam)`` (creating a contact), ``p_down(0) = 0`` with a wall,

this reproduces the transition rates ``2 lam/(1+lam)``, ``2/(1+lam)`` and ``1``.
The superposition of the site clocks is simulated as one clock of rate
``2 (2L - 1)`` whose rings pick a uniform site. Ring times, sites and uniforms
are hashed from ``(seed, ring index)``, so runs of the same size started with
the same seed read the same randomness whatever their state. This shared
graphical construction is what makes the monotone couplings pathwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .lattice import LatticePath, Profile, rescale, validate

__all__ = [
    "PinningParameter",
    "INFINITE",
    "DynamicsConfig",
    "TrajectoryRecord",
    "TerminationSample",
    "flip_rate",
    "simulate",
    "coupled_simulate",
    "termination_time_ensemble",
    "derive_seed",
]


@dataclass(frozen=True)
class PinningParameter:
    """Pinning strength: a finite ``lam >= 0`` or the sticky limit (``value is None``)."""

    value: Optional[float]

    def __post_init__(self):
        if self.value is not None:
            v = float(self.value)
            if not v >= 0 or math.isinf(v):
                raise ValueError(f"finite pinning parameter must lie in [0, inf), got {self.value}")
            object.__setattr__(self, "value", v)

    @classmethod
    def parse(cls, raw) -> "PinningParameter":
        if isinstance(raw, PinningParameter):
            return raw
        if raw is None:
            return INFINITE
        if isinstance(raw, str) and raw.strip().lower() in ("inf", "infinity", "infinite", "sticky"):
            return INFINITE
        if isinstance(raw, float) and math.isinf(raw):
            return INFINITE
        return cls(float(raw))

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def contact_probability(self) -> float:
        """Heat-bath probability of dropping to 0 when both neighbours are at height 1."""
        if self.value is None:
            return 1.0
        return self.value / (1.0 + self.value)

    def __str__(self):
        return "inf" if self.value is None else repr(self.value)


INFINITE = PinningParameter(None)


def flip_rate(path: LatticePath, x: int, lam) -> float:
    """Rate of the transition ``eta -> eta^(x)``.

    A ``Fraction`` pinning parameter gives an exact ``Fraction`` rate.
    """
    L = path.L
    if not -L < x < L:
        raise IndexError(f"site {x} is not interior to [-{L}, {L}]")
    exact = isinstance(lam, Fraction)
    one = Fraction(1) if exact else 1.0
    if not exact:
        lam = PinningParameter.parse(lam)
    a, c, b = path[x - 1], path[x], path[x + 1]
    if a != b:
        return 0 * one
    if not path.walled:
        return one
    new = 2 * a - c
    if new < 0:
        return 0 * one
    if exact:
        if c == 2 and new == 0:
            return 2 * lam / (1 + lam)
        if c == 0 and new == 2:
            return 2 / (1 + lam)
        return one
    if c == 2 and new == 0:
        return 2.0 if lam.is_infinite else 2.0 * lam.value / (1.0 + lam.value)
    if c == 0 and new == 2:
        return 0.0 if lam.is_infinite else 2.0 / (1.0 + lam.value)
    return 1.0


def derive_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th member of an ensemble rooted at ``seed``."""
    return int(_mix64(np.uint64((seed * 0x9E3779B97F4A7C15 + index + 1) % 2**64)))


# ---------------------------------------------------------------------------
# counter-based randomness

_C_GOLD = np.uint64(0x9E3779B97F4A7C15)
_C_SITE = np.uint64(0xD1B54A32D192ED03)
_C_M1 = np.uint64(0xBF58476D1CE4E5B9)
_C_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S32 = np.uint64(32)
_TWO53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _C_M1
    z = (z ^ (z >> _S27)) * _C_M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _uniform(key, counter):
    z = _mix64(key + np.uint64(counter) * _C_GOLD)
    return ((z >> _S11) + 0.5) * _TWO53


# ---------------------------------------------------------------------------
# kernel


@njit(cache=True)
def _p_down(a, walled, p_contact):
    if walled:
        if a == 0:
            return 0.0
        if a == 1:
            return p_contact
    return 0.5


@njit(cache=True)
def _site_terms(h, i, walled, p_contact, ring_rate, plain):
    """(rate * dA, rate * dA^2) for the only move available at index ``i``."""
    a = h[i - 1]
    if a != h[i + 1]:
        return 0.0, 0.0
    c = h[i]
    if c > a:
        new = a - 1
        p = 1.0 if plain else _p_down(a, walled, p_contact)
    else:
        new = a + 1
        p = 1.0 if plain else 1.0 - _p_down(a, walled, p_contact)
    if p == 0.0:
        return 0.0, 0.0
    da = float(max(new, 1) - max(c, 1))
    rate = ring_rate * p
    return rate * da, rate * da * da


@njit(cache=True)
def _area(h):
    s = 1.0  # the two endpoints, trapezoid weight 1/2 each, max(0, 1) = 1
    for i in range(1, h.size - 1):
        s += max(h[i], 1)
    return s


@njit(cache=True)
def _run_kernel(h, walled, p_contact, ring_rate, plain, seed, t_max, sample_t, snap_t,
                stop_at_min, out_obs, snaps):
    """Advance ``h`` in place up to microscopic time ``t_max``.

    out_obs columns: area, fourier, contacts, min_height, drift_integral,
    martingale, bracket_integral, drift.
    Returns (termination_time or -1, n_flips, n_rings, max |martingale|).
    """
    n_nodes = h.size
    L = (n_nodes - 1) // 2
    n = n_nodes - 2
    useed = np.uint64(seed)

    g = np.empty(n_nodes)
    for i in range(n_nodes):
        g[i] = math.cos((i - L) * math.pi / (2.0 * L))

    key = _mix64(useed ^ _C_SITE)
    rate_total = ring_rate * n
    ring = 0
    t = -math.log(_uniform(key, 0)) / rate_total

    area = _area(h)
    area0 = area
    fourier = 0.0
    contacts = 0
    for i in range(n_nodes):
        fourier += g[i] * h[i]
    for i in range(1, n_nodes - 1):
        if h[i] == 0:
            contacts += 1
    drift = 0.0
    bracket = 0.0
    for i in range(1, n_nodes - 1):
        d, q = _site_terms(h, i, walled, p_contact, ring_rate, plain)
        drift += d
        bracket += q
    drift_int = 0.0
    bracket_int = 0.0
    t_last = 0.0
    max_abs_m = 0.0

    n_samp = sample_t.size
    n_snap = snap_t.size
    k_samp = 0
    k_snap = 0
    n_flips = 0
    n_rings = 0
    t_term = -1.0
    absorbed = stop_at_min and walled and contacts == L - 1
    if absorbed:
        t_term = 0.0

    while True:
        if absorbed:
            t = math.inf
        t_stop = min(t, t_max)
        while k_samp < n_samp and sample_t[k_samp] <= t_stop:
            ts = sample_t[k_samp]
            dint = drift_int + drift * (ts - t_last)
            out_obs[k_samp, 0] = area
            out_obs[k_samp, 1] = fourier
            out_obs[k_samp, 2] = contacts
            mh = h[0]
            for i in range(n_nodes):
                if h[i] < mh:
                    mh = h[i]
            out_obs[k_samp, 3] = mh
            out_obs[k_samp, 4] = dint
            out_obs[k_samp, 5] = area - area0 - dint
            out_obs[k_samp, 6] = bracket_int + bracket * (ts - t_last)
            out_obs[k_samp, 7] = drift
            k_samp += 1
        while k_snap < n_snap and snap_t[k_snap] <= t_stop:
            for i in range(n_nodes):
                snaps[k_snap, i] = h[i]
            k_snap += 1
        if t > t_max:
            break

        t_ring = t
        z = _mix64(key + np.uint64(3 * ring + 1) * _C_GOLD)
        i = 1 + np.int64(((z >> _S32) * np.uint64(n)) >> _S32)
        u = _uniform(key, 3 * ring + 2)
        ring += 1
        n_rings += 1
        t = t_ring - math.log(_uniform(key, 3 * ring)) / rate_total

        a = h[i - 1]
        if a != h[i + 1]:
            continue
        c = h[i]
        if plain:
            new = 2 * a - c
        elif u < _p_down(a, walled, p_contact):
            new = a - 1
        else:
            new = a + 1
        if new == c:
            continue

        # integrate drift and bracket over the holding interval before the jump
        m_before = area - area0 - (drift_int + drift * (t_ring - t_last))
        if abs(m_before) > max_abs_m:
            max_abs_m = abs(m_before)
        drift_int += drift * (t_ring - t_last)
        bracket_int += bracket * (t_ring - t_last)
        t_last = t_ring

        for j in range(i - 1, i + 2):
            if 0 < j < n_nodes - 1:
                d, q = _site_terms(h, j, walled, p_contact, ring_rate, plain)
                drift -= d
                bracket -= q
        h[i] = new
        for j in range(i - 1, i + 2):
            if 0 < j < n_nodes - 1:
                d, q = _site_terms(h, j, walled, p_contact, ring_rate, plain)
                drift += d
                bracket += q
        area += max(new, 1) - max(c, 1)
        fourier += g[i] * (new - c)
        if c == 0:
            contacts -= 1
        if new == 0:
            contacts += 1
        n_flips += 1

        m_after = area - area0 - drift_int
        if abs(m_after) > max_abs_m:
            max_abs_m = abs(m_after)

        if stop_at_min and walled and contacts == L - 1:
            absorbed = True
            t_term = t_ring

    # drift and bracket are piecewise constant; close the last holding interval
    end = t_max
    m_end = area - area0 - (drift_int + drift * (end - t_last))
    if abs(m_end) > max_abs_m:
        max_abs_m = abs(m_end)
    return t_term, n_flips, n_rings, max_abs_m


# ---------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class DynamicsConfig:
    """Configuration of one run. Times are rescaled: microscopic time is ``t * L**2``."""

    L: int
    lam: PinningParameter = field(default_factory=lambda: PinningParameter(1.0))
    walled: bool = True
    horizon: float = 1.0
    snapshot_times: tuple = ()
    sample_times: tuple = ()
    seed: int = 0
    clock: str = "uniformized"
    stop_at_min: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lam", PinningParameter.parse(self.lam))
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        if self.L < 1:
            raise ValueError("L must be positive")
        if not self.horizon >= 0:
            raise ValueError("horizon must be non-negative")
        for name in ("snapshot_times", "sample_times"):
            ts = getattr(self, name)
            if list(ts) != sorted(ts):
                raise ValueError(f"{name} must be sorted")
            if ts and (ts[0] < 0 or ts[-1] > self.horizon):
                raise ValueError(f"{name} must lie in [0, horizon]")
        if self.clock not in ("uniformized", "plain"):
            raise ValueError(f"unknown clock {self.clock!r}")
        if self.clock == "plain" and self.walled:
            raise ValueError("plain rate-1 clocks only describe the dynamics without wall")

    def with_seed(self, seed: int) -> "DynamicsConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class TrajectoryRecord:
    config: DynamicsConfig
    eta0: LatticePath
    snapshots: np.ndarray  # (n_snapshots, 2L+1) heights
    observables: np.ndarray  # (n_samples, 8), see OBSERVABLE_COLUMNS
    termination_time: Optional[float]  # microscopic
    max_abs_martingale: float
    n_flips: int
    n_rings: int
    final: LatticePath

    OBSERVABLE_COLUMNS = ("area", "fourier", "contacts", "min_height", "drift_integral",
                          "martingale", "bracket_integral", "drift")

    def column(self, name: str) -> np.ndarray:
        return self.observables[:, self.OBSERVABLE_COLUMNS.index(name)]

    @property
    def snapshot_times(self) -> tuple:
        return self.config.snapshot_times

    @property
    def sample_times(self) -> np.ndarray:
        return np.asarray(self.config.sample_times)

    def snapshot_paths(self) -> list[LatticePath]:
        return [LatticePath(h, self.config.walled) for h in self.snapshots]

    def snapshot_profiles(self) -> list[Profile]:
        return [rescale(p) for p in self.snapshot_paths()]

    @property
    def rescaled_termination_time(self) -> Optional[float]:
        if self.termination_time is None:
            return None
        return self.termination_time / self.config.L ** 2

    def observables_csv(self) -> str:
        L2 = float(self.config.L) ** 2
        lines = ["t_rescaled,area_rescaled,fourier_rescaled,contacts,min_height"]
        for t, row in zip(self.config.sample_times, self.observables):
            lines.append(f"{float(t)!r},{float(row[0] / L2)!r},{float(row[1] / L2)!r},{int(row[2])},{int(row[3])}")
        return "\n".join(lines) + "\n"

    def snapshots_text(self) -> str:
        return "".join(f"{float(t)!r} {p.to_line()}\n" for t, p in zip(self.snapshot_times, self.snapshot_paths()))


def simulate(config: DynamicsConfig, eta0: LatticePath) -> TrajectoryRecord:
    """Exact simulation of the chain from ``eta0`` up to time ``config.horizon * L**2``."""
    problem = validate(eta0)
    if problem is not None:
        raise ValueError(f"invalid initial path: {problem}")
    if eta0.L != config.L:
        raise ValueError(f"initial path has L={eta0.L}, config has L={config.L}")
    if eta0.walled != config.walled:
        raise ValueError("initial path and config disagree on the wall")

    L2 = float(config.L) ** 2
    sample_t = np.asarray(config.sample_times, dtype=float) * L2
    snap_t = np.asarray(config.snapshot_times, dtype=float) * L2
    obs = np.zeros((sample_t.size, len(TrajectoryRecord.OBSERVABLE_COLUMNS)))
    snaps = np.zeros((snap_t.size, 2 * config.L + 1), dtype=np.int64)
    h = eta0.heights.copy()
    plain = config.clock == "plain"
    stop = bool(config.stop_at_min and config.walled and config.lam.is_infinite)
    t_term, n_flips, n_rings, max_m = _run_kernel(
        h, config.walled, config.lam.contact_probability(), 1.0 if plain else 2.0, plain,
        np.uint64(config.seed % 2**64), config.horizon * L2, sample_t, snap_t, stop, obs, snaps)
    return TrajectoryRecord(
        config=config,
        eta0=eta0,
        snapshots=snaps,
        observables=obs,
        termination_time=None if t_term < 0 else float(t_term),
        max_abs_martingale=float(max_m),
        n_flips=int(n_flips),
        n_rings=int(n_rings),
        final=LatticePath(h, config.walled),
    )


def coupled_simulate(config: DynamicsConfig, runs: Sequence[tuple]) -> list[TrajectoryRecord]:
    """Run several dynamics on one graphical construction.

    ``runs`` holds ``(eta0, lam)`` pairs; the wall is taken from ``eta0.walled``.
    All runs read the same site clocks and uniforms (those of ``config.seed``),
    so ordered inputs stay ordered pathwise.
    """
    out = []
    for eta0, lam in runs:
        if eta0.L != config.L:
            raise ValueError(f"run has L={eta0.L}, expected {config.L}")
        cfg = replace(config, lam=PinningParameter.parse(lam), walled=eta0.walled, clock="uniformized",
                      stop_at_min=False)
        out.append(simulate(cfg, eta0))
    return out


@dataclass(frozen=True)
class TerminationSample:
    """Rescaled termination times; ``absorbed[k]`` is False when run k hit the horizon first."""

    times: np.ndarray
    absorbed: np.ndarray
    seeds: np.ndarray

    def mean(self) -> float:
        return float(np.mean(self.times[self.absorbed]))


def termination_time_ensemble(config: DynamicsConfig, eta0: LatticePath, n_seeds: int,
                              area_bound: Optional[float] = None) -> TerminationSample:
    """Sample ``T / L**2`` (hitting time of the minimal path) over ``n_seeds`` seeds.

    ``area_bound`` is the rescaled area of the initial profile; when given, the
    horizon must exceed it (the expected time is about half of it).
    """
    if not (config.walled and config.lam.is_infinite):
        raise ValueError("termination time is defined for the walled sticky dynamics")
    if area_bound is not None and config.horizon < area_bound:
        raise ValueError(f"horizon {config.horizon} shorter than area bound {area_bound}")
    cfg = replace(config, stop_at_min=True, snapshot_times=(), sample_times=())
    seeds = np.array([derive_seed(config.seed, k) for k in range(n_seeds)], dtype=np.uint64)
    times = np.full(n_seeds, np.nan)
    absorbed = np.zeros(n_seeds, dtype=bool)
    for k, s in enumerate(seeds):
        rec = simulate(cfg.with_seed(int(s)), eta0)
        if rec.termination_time is not None:
            times[k] = rec.rescaled_termination_time
            absorbed[k] = True
    return TerminationSample(times, absorbed, seeds)

