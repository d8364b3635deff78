"""Slab geometry and the Maxwell reflection boundary condition.

Walls are the planes ``x = 0`` (outward normal ``-e_1``) and ``x = L``
(outward normal ``+e_1``), so specular reflection is the sign flip of the
first velocity component and maps grid nodes onto grid nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .velocity_space import SQRT_2PI, VelocityGrid, average

WALLS = ("left", "right")
_NORMAL_SIGN = {"left": -1, "right": 1}


@dataclass(frozen=True)
class SlabDomain:
    L: float = 1.0
    N_x: int = 64
    alpha: float = 1.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("slab length must be positive")
        if int(self.N_x) < 1:
            raise ValueError("need at least one cell")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"accommodation coefficient must lie in [0, 1], got {self.alpha}")

    @property
    def dx(self) -> float:
        return self.L / self.N_x

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N_x) + 0.5) * self.dx

    @staticmethod
    def normal_sign(wall: str) -> int:
        try:
            return _NORMAL_SIGN[wall]
        except KeyError:
            raise ValueError(f"unknown wall {wall!r}") from None

    def wall_position(self, wall: str) -> float:
        return 0.0 if self.normal_sign(wall) < 0 else self.L


@dataclass
class WallTrace:
    """Full trace on one wall: outgoing entries from the interior, incoming from the BC."""
    wall: str
    values: np.ndarray
    outgoing: np.ndarray       # boolean mask v.n > 0
    t: float = 0.0
    filled: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def incoming(self) -> np.ndarray:
        return ~self.outgoing

    @property
    def gamma_plus(self) -> np.ndarray:
        return np.where(self.outgoing, self.values, np.nan)


def normal_velocity(grid: VelocityGrid, wall: str) -> np.ndarray:
    return SlabDomain.normal_sign(wall) * grid.nodes[:, 0]


def outgoing_mask(grid: VelocityGrid, wall: str) -> np.ndarray:
    return normal_velocity(grid, wall) > 0


def _check_symmetric(grid: VelocityGrid):
    R = grid.reflect[0]
    if not np.array_equal(grid.nodes[R, 0], -grid.nodes[:, 0]) or \
            not np.array_equal(grid.weights[R], grid.weights):
        raise ValueError("grid is not symmetric under the wall-normal reflection")
    return R


def specular_reflect(f, grid: VelocityGrid, wall: str = "left"):
    """``(L f)(v) = f(R v)``; the same involution serves both walls."""
    SlabDomain.normal_sign(wall)
    R = _check_symmetric(grid)
    return np.asarray(f)[..., R]


def outgoing_average(f, grid: VelocityGrid, wall: str) -> float:
    """``sqrt(2 pi) * sum_{v.n>0} w (v.n) f``; accepts leading axes."""
    vn = normal_velocity(grid, wall)
    out = vn > 0
    f = np.asarray(f, dtype=float)
    return SQRT_2PI * (f[..., out] @ (grid.weights[out] * vn[out]))


def make_trace(outgoing_values, grid: VelocityGrid, wall: str, t: float = 0.0) -> WallTrace:
    """Trace with the outgoing half taken from ``outgoing_values`` (length K)."""
    vals = np.array(outgoing_values, dtype=float)
    if vals.shape != (grid.K,):
        raise ValueError(f"trace must have {grid.K} values")
    out = outgoing_mask(grid, wall)
    vals[~out] = np.nan
    return WallTrace(wall=wall, values=vals, outgoing=out, t=t)


def maxwell_incoming(gamma_out, grid: VelocityGrid, wall: str, alpha: float):
    """Incoming values from a full-length array whose outgoing entries are set.

    Vectorized over leading axes.  Returns the full array with incoming
    entries replaced by ``(1 - alpha) L gamma + alpha <gamma>``.
    """
    g = np.asarray(gamma_out, dtype=float)
    out = outgoing_mask(grid, wall)
    if np.any(g[..., out] < 0):
        raise ValueError("negative outgoing trace")
    R = _check_symmetric(grid)
    avg = outgoing_average(g, grid, wall)
    Lg = g[..., R]
    # written as a correction of the specular value so constants are fixed exactly
    inc = Lg + alpha * (np.asarray(avg)[..., None] - Lg)
    return np.where(out, g, inc)


def apply_maxwell_bc(trace: WallTrace, alpha: float, grid: VelocityGrid) -> WallTrace:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    vals = np.where(trace.outgoing, trace.values, 0.0)
    full = maxwell_incoming(vals, grid, trace.wall, alpha)
    return WallTrace(wall=trace.wall, values=full, outgoing=trace.outgoing, t=trace.t,
                     filled=True, meta=dict(trace.meta, alpha=alpha))


def wall_mass_flux(trace, grid: VelocityGrid, wall: str | None = None) -> float:
    """``<(v.n) gamma G>`` over the full trace (mirror pairs summed first)."""
    if isinstance(trace, WallTrace):
        if not trace.filled and np.any(np.isnan(trace.values)):
            raise ValueError("trace incoming half is not populated")
        wall, vals = trace.wall, trace.values
    else:
        vals = np.asarray(trace, dtype=float)
    return average(np.asarray(vals) * normal_velocity(grid, wall), grid)


def halfspace_defect(grid: VelocityGrid) -> float:
    return float(abs(outgoing_average(np.ones(grid.K), grid, "right") - 1.0))


def flux_tolerance(grid: VelocityGrid) -> float:
    """Assertion baseline for wall-flux identities on ``grid``."""
    return max(halfspace_defect(grid), 64 * np.finfo(float).eps)


def boundary_mass_flux_term(times, traces: dict, grid: VelocityGrid, chi=None) -> float:
    """``j = sum_walls chi(wall) int <(v.n) gamma gtilde> dt`` (trapezoid in time).

    ``traces`` maps each wall name to an array ``(n_times, K)`` of the full
    renormalized trace ``gamma gtilde``; ``chi`` maps wall names to weights
    and defaults to one on every wall.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0 or not traces:
        raise ValueError("empty trace series")
    total = 0.0
    for wall, series in traces.items():
        series = np.asarray(series, dtype=float)
        if series.shape[0] != times.size:
            raise ValueError(f"{wall}: {series.shape[0]} traces for {times.size} times")
        weight = 1.0 if chi is None else float(chi[wall] if isinstance(chi, dict) else chi(wall))
        flux = average(series * normal_velocity(grid, wall), grid)
        total += weight * (trapezoid(flux, times) if times.size > 1 else 0.0)
    return float(total)
