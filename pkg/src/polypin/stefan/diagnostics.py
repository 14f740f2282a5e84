"""Qualitative checks on a Stefan run: boundary curvature relations, maximum
principle for the curvature, inflection counting, concavification, collision
and the near-collision width bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .front_tracking import StefanRun

__all__ = ["Check", "DiagnosticsReport", "stefan_diagnostics", "boundary_relation_residual",
           "kx_ends", "entropy_like"]


@dataclass(frozen=True)
class Check:
    """``passed`` is None when the check does not apply to the run."""

    name: str
    passed: Optional[bool]
    value: float = math.nan
    detail: str = ""


@dataclass
class DiagnosticsReport:
    checks: dict = field(default_factory=dict)
    concavification_time: Optional[float] = None

    def __getitem__(self, name) -> Check:
        return self.checks[name]

    def summary(self) -> str:
        lines = []
        for c in self.checks.values():
            status = "n/a" if c.passed is None else ("pass" if c.passed else "FAIL")
            lines.append(f"{c.name}: {status} ({c.value:.4g}) {c.detail}".rstrip())
        return "\n".join(lines) + "\n"


def kx_ends(k: np.ndarray, dx: float) -> tuple:
    """Second-order one-sided derivatives of ``k`` at both ends."""
    left = (-3 * k[0] + 4 * k[1] - k[2]) / (2 * dx)
    right = (3 * k[-1] - 4 * k[-2] + k[-3]) / (2 * dx)
    return left, right


def boundary_relation_residual(state) -> float:
    """``max(|k_x(l) + k(l)^2|, |k_x(r) - k(r)^2|)`` on a recorded state."""
    k = state.k.values
    kl, kr = kx_ends(k, state.k.dx)
    return float(max(abs(kl + k[0] ** 2), abs(kr - k[-1] ** 2)))


def entropy_like(state) -> float:
    """``int k log k`` over the set where ``k > 0``."""
    k = np.clip(state.k.values, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(k > 0, k * np.log(np.where(k > 0, k, 1.0)), 0.0)
    return float(np.trapezoid(v, dx=state.k.dx))


def stefan_diagnostics(run: StefanRun, t_skip: float = 0.05, relation_tol: Optional[float] = None,
                       k_tol: float = 1e-6, tstar: Optional[float] = None) -> DiagnosticsReport:
    """Evaluate six checks on ``run``.

    ``t_skip`` excludes the initial layer from the boundary relation (initial data
    need not satisfy it); its residual is first order, so the default tolerance is
    ``20 dx`` for the initial cell size. ``tstar`` defaults to half the initial area.
    """
    S = run.series
    if relation_tol is None:
        relation_tol = 20.0 * run.initial.f.dx
    t = S["t"]
    rep = DiagnosticsReport()

    # (i) boundary relation on recorded states after the initial layer; the terminal
    # state of a collided or singular run sits on a degenerate grid and is skipped
    states = run.states if run.verdict == "horizon" else run.states[:-1]
    states = [st for st in states if st.t >= t_skip and st.k.n_cells >= 4]
    if states:
        res = max(boundary_relation_residual(st) for st in states)
        rep.checks["boundary_relation"] = Check("boundary_relation", bool(res <= relation_tol), res,
                                                f"over {len(states)} states")
    else:
        rep.checks["boundary_relation"] = Check("boundary_relation", None, math.nan, "no state after initial layer")

    # (ii) max principle for k
    edge = np.maximum.accumulate(np.maximum(np.abs(S["k_at_l"]), np.abs(S["k_at_r"])))
    allowed = np.maximum(S["k_max"][0], edge)
    excess = float(np.max(S["k_max"] - allowed * (1 + 1e-3) - 1e-6))
    rep.checks["curvature_bound"] = Check("curvature_bound", bool(excess <= 0), excess,
                                          "max|k| minus max(initial, boundary history)")

    # (iii) inflection count nonincreasing
    infl = S["inflections"]
    ups = int(np.count_nonzero(np.diff(infl) > 0))
    rep.checks["inflections_nonincreasing"] = Check("inflections_nonincreasing", ups == 0, float(ups),
                                                    f"from {int(infl[0])} to {int(infl[-1])}")

    # (iv) concavification before the end of the run
    scale = np.maximum(S["k_max"], 1e-300)
    concave = (S["k_min"] >= -k_tol * scale)
    if concave.all():
        t2 = float(t[0])
    else:
        last_bad = int(np.flatnonzero(~concave)[-1])
        t2 = float(t[last_bad + 1]) if last_bad + 1 < t.size else None
    rep.concavification_time = t2
    end = float(t[-1])
    passed = t2 is not None and (t2 < end or concave.all())
    rep.checks["concavification"] = Check("concavification", bool(passed),
                                          math.nan if t2 is None else t2,
                                          f"run ends at {end:.6g} ({run.verdict})")

    # (v) collision for concave data
    if concave[0]:
        rep.checks["collision"] = Check("collision", run.verdict == "collided",
                                        float(S["r"][-1] - S["l"][-1]), run.verdict)
    else:
        rep.checks["collision"] = Check("collision", None, math.nan, "initial data not concave")

    # (vi) width bound on [T*/2, T*)
    T = tstar if tstar is not None else 0.5 * S["area"][0]
    if run.verdict == "collided" and T > 0:
        half = int(np.argmin(np.abs(t - T / 2)))
        eta = float(S["k_min"][half])
        window = (t >= t[half]) & (t < T)
        if eta > 0 and window.any():
            bound = 2 * (8 * (T - t[window]) / eta) ** 0.25
            width = S["r"][window] - S["l"][window]
            margin = float(np.min(bound - width))
            rep.checks["width_bound"] = Check("width_bound", margin >= 0, margin, f"eta={eta:.4g}")
        else:
            rep.checks["width_bound"] = Check("width_bound", None, math.nan, "curvature not positive at T*/2")
    else:
        rep.checks["width_bound"] = Check("width_bound", None, math.nan, "no collision")
    return rep
