"""Limiting PDE solvers: Dirichlet heat flow and the contracting Stefan problem."""
from .diagnostics import DiagnosticsReport, stefan_diagnostics
from .fixed_point import FixedPointReport, stefan_fixed_point
from .front_tracking import SlopeParameter, StefanRun, StefanState, stefan_front_tracking
from .heat import HeatSeries, heat_crank_nicolson, heat_dirichlet
from .tools import agmon_check, heat_boundary_slope, pedestal, tstar

__all__ = [
    "DiagnosticsReport",
    "stefan_diagnostics",
    "FixedPointReport",
    "stefan_fixed_point",
    "SlopeParameter",
    "StefanRun",
    "StefanState",
    "stefan_front_tracking",
    "HeatSeries",
    "heat_crank_nicolson",
    "heat_dirichlet",
    "agmon_check",
    "heat_boundary_slope",
    "pedestal",
    "tstar",
]
