"""Kinetic-to-acoustic limit laboratory on a slab with Maxwell walls."""
from ._backend import BACKEND
from .acoustic import AcousticState, solve_fv, solve_modal
from .boundary import SlabDomain, maxwell_incoming
from .collision import KernelSpec, audit_assumptions, build_tables, collide, normalize_kernel
from .diagnostics import record_state, relative_entropy
from .harness import RunConfig, SweepConfig, fit_slope, run_kinetic, run_sweep
from .kinetic import KineticState, PositivityError, init_state, integrate, make_operator
from .velocity_space import VelocityGrid, build_grid

__all__ = [
    "BACKEND", "AcousticState", "solve_fv", "solve_modal", "SlabDomain", "maxwell_incoming",
    "KernelSpec", "audit_assumptions", "build_tables", "collide", "normalize_kernel",
    "record_state", "relative_entropy", "RunConfig", "SweepConfig", "fit_slope", "run_kinetic",
    "run_sweep", "KineticState", "PositivityError", "init_state", "integrate", "make_operator",
    "VelocityGrid", "build_grid",
]
