"""Entropy functionals, wall information, conservation defects and Young functions."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import collision as coll
from .boundary import WALLS, normal_velocity, outgoing_average, outgoing_mask, wall_mass_flux
from .velocity_space import SQRT_2PI, VelocityGrid

LOG_FLOOR = 1e-30


def eta(G):
    """``G log G - G + 1`` with ``0 log 0 = 0``."""
    G = np.asarray(G, dtype=float)
    safe = np.where(G > 0, G, 1.0)
    return np.where(G > 0, G * np.log(safe), 0.0) - G + 1.0


def relative_entropy(state=None, *, G=None, grid: VelocityGrid | None = None, dx: float | None = None) -> float:
    """``sum_i dx <eta(G_i)>`` for a kinetic state (or explicit arrays)."""
    if state is not None:
        G, grid, dx = state.G, state.grid, state.domain.dx
    return float(dx * np.sum(eta(G) @ grid.weights))


def _collision_step(op, grid):
    from .kinetic import CollisionStep
    if isinstance(op, CollisionStep):
        return op
    if isinstance(op, coll.CollisionTables):
        return CollisionStep("full-q", op.grid, op)
    if op in ("bgk", None):
        return CollisionStep("bgk", grid)
    raise TypeError(f"cannot interpret {op!r} as a collision operator")


def dissipation_rate(state, op=None, per_cell: bool = False):
    """Dissipation ``R`` integrated over the slab (``op``: tables, operator or ``"bgk"``).

    With quadrature tables this is the quarter mu-average of
    ``log(G'G1'/(G G1)) (G'G1' - G G1)``; for BGK runs the matching quantity
    ``<(G - G_eq) log(G/G_eq)>`` is used.
    """
    step = _collision_step(op, state.grid)
    G = state.G
    n_floor = int(np.count_nonzero(G <= LOG_FLOOR))
    if n_floor:
        state.meta.setdefault("warnings", []).append(f"log cap active on {n_floor} entries")
    R = np.asarray(step.dissipation(G))
    return R if per_cell else float(state.domain.dx * np.sum(R))


def dg_information(trace, grid: VelocityGrid, wall: str) -> float:
    """Jensen gap ``<eta(g)>_wall - eta(<g>_wall)`` of the outgoing trace."""
    f = np.asarray(trace, dtype=float)
    out = outgoing_mask(grid, wall)
    if np.any(f[..., out] < 0):
        raise ValueError("negative outgoing trace")
    vals = np.where(out, f, 1.0)
    return outgoing_average(eta(vals), grid, wall) - eta(outgoing_average(vals, grid, wall))


def conservation_defects(G, eps: float, delta: float, op, grid: VelocityGrid,
                         renormalized: bool = True) -> np.ndarray:
    """Defect ``<zeta Gamma'(G) C(G)> / (eps delta)`` for all invariants.

    ``C`` is the conservative collision operator of the run, which equals the
    sum of the scaled integrand over the triples of each node.  Returns an
    array ``(..., D+2)`` ordered as ``1, v_1..v_D, |v|^2``.
    """
    step = _collision_step(op, grid)
    G = np.asarray(G, dtype=float)
    C = step.operator(G)
    if renormalized:
        N = 1.0 + (G - 1.0) ** 2
        C = C * (2.0 / N**2 - 1.0 / N)
    return (C * grid.weights) @ grid.invariants().T / (eps * delta)


def conservation_defect(state, zeta: int, op=None, renormalized: bool = True) -> np.ndarray:
    """Per-cell defect for the invariant with index ``zeta``."""
    d = conservation_defects(state.G, state.eps, state.delta, op, state.grid, renormalized)
    return d[..., zeta]


def defect_from_triples(G, eps: float, delta: float, tables: coll.CollisionTables, zeta) -> float:
    """Reference evaluation through the triple-indexed integrand (single cell)."""
    q = coll.scaled_q(G, eps, delta, tables)
    N = 1.0 + (G - 1.0) ** 2
    weight = np.asarray(zeta, dtype=float) * (2.0 / N**2 - 1.0 / N)
    return coll.mu_average(weight[tables.t_k] * q, tables) / np.sqrt(eps)


# --- Young functions ---------------------------------------------------------

def young_r(z):
    z = np.asarray(z, dtype=float)
    if np.any(z <= -1):
        raise ValueError("young_r needs z > -1")
    return z * np.log1p(z)


def _solve_stationary(p):
    """Solve ``y + 1 - exp(-y) = p`` for ``y = log(1 + z)`` (monotone in ``y``)."""
    p = np.asarray(p, dtype=float)
    lo = np.where(p >= 0, np.maximum(p - 1.0, 0.0), -np.log1p(-np.minimum(p, 0.0)) - 1.0)
    hi = np.where(p >= 0, p, 0.0)
    y = np.where(p > 1, p - 1.0, np.where(p >= 0, 0.5 * p, -np.log1p(-np.minimum(p, 0.0))))
    y = np.clip(y, lo, hi)
    for _ in range(100):
        f = y + 1.0 - np.exp(-y) - p
        lo = np.where(f < 0, y, lo)
        hi = np.where(f > 0, y, hi)
        yn = y - f / (1.0 + np.exp(-y))
        bad = (yn <= lo) | (yn >= hi)
        yn = np.where(bad, 0.5 * (lo + hi), yn)
        if np.all(np.abs(yn - y) <= 1e-15 * np.maximum(1.0, np.abs(y))):
            y = yn
            break
        y = yn
    return y


def young_r_star(p):
    """Legendre dual ``sup_{z>-1} (p z - z log(1+z))``.

    At the maximizer ``log(1+z) + z/(1+z) = p``; with ``y = log(1+z)`` the
    value simplifies to ``2 (cosh y - 1) = 4 sinh^2(y/2)``.
    """
    p = np.asarray(p, dtype=float)
    y = _solve_stationary(p)
    out = 4.0 * np.sinh(0.5 * y) ** 2
    return out if out.ndim else float(out)


# --- records -----------------------------------------------------------------

@dataclass
class EntropyRecord:
    t: float
    H: float
    R: float
    E_left: float
    E_right: float
    defect_l1: list
    defect_total: list
    wall_flux_left: float
    wall_flux_right: float
    renorm_flux_left: float
    renorm_flux_right: float
    mass: float
    rho_total: float
    slack: float = float("nan")
    moment_error: float = float("nan")
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        for name in ("defect_l1", "defect_total"):
            for j, v in enumerate(d.pop(name)):
                d[f"{name}_{j}"] = v
        d.update(self.extra)
        return d


def record_state(state, op) -> tuple[EntropyRecord, dict]:
    """Diagnostics of one output time plus the per-cell arrays behind them."""
    from .kinetic import wall_traces

    grid, dom = state.grid, state.domain
    step = _collision_step(op, grid)
    G = state.G
    w = grid.weights
    Z = grid.invariants()
    dx = dom.dx
    delta = state.delta
    traces = dict(zip(WALLS, wall_traces(G, grid, dom.alpha)))
    E = {wall: float(dg_information(traces[wall], grid, wall)) for wall in WALLS}
    flux = {wall: float(wall_mass_flux(traces[wall], grid, wall)) for wall in WALLS}

    def gtilde(F):
        return (F - 1.0) / delta / (1.0 + (F - 1.0) ** 2)

    gt = gtilde(G)
    m = (gt * w) @ Z.T
    vm = (gt * (w * grid.nodes[:, 0])) @ Z.T
    wall_m = {wall: (gtilde(traces[wall]) * w * normal_velocity(grid, wall)) @ Z.T for wall in WALLS}
    defect = conservation_defects(G, state.eps, delta, step, grid)
    g = (G - 1.0) / delta
    rho = g @ w
    u = (g * w) @ grid.nodes
    theta = g @ (w * (grid.speed2 / grid.D - 1.0))
    rec = EntropyRecord(
        t=float(state.t), H=relative_entropy(state), R=dissipation_rate(state, step),
        E_left=E["left"], E_right=E["right"],
        defect_l1=list(map(float, dx * np.sum(np.abs(defect), axis=0))),
        defect_total=list(map(float, dx * np.sum(defect, axis=0))),
        wall_flux_left=flux["left"], wall_flux_right=flux["right"],
        renorm_flux_left=float(wall_m["left"][0]), renorm_flux_right=float(wall_m["right"][0]),
        mass=state.mass(), rho_total=float(dx * np.sum(rho)))
    arrays = {"G": G.copy(), "rho": rho, "u": u, "theta": theta, "m": m, "vm": vm,
              "wall_m_left": wall_m["left"], "wall_m_right": wall_m["right"],
              "trace_left": traces["left"], "trace_right": traces["right"], "defect": defect}
    return rec, arrays


def entropy_slack(records, H_in: float, eps: float, alpha: float) -> np.ndarray:
    """``H_in - H(t) - int_0^t [R/eps + alpha/sqrt(2 pi) E]`` (trapezoid on the cadence)."""
    t = np.array([r.t for r in records])
    H = np.array([r.H for r in records])
    rate = np.array([r.R / eps + alpha / SQRT_2PI * (r.E_left + r.E_right) for r in records])
    integral = cumulative_trapezoid(rate, t, initial=0.0) if t.size > 1 else np.zeros(1)
    return H_in - H - integral
