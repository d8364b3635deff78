"""Time integration of the rescaled kinetic equation on the slab.

Strang splitting: half transport, collision over the full step, half
transport.  Transport is first-order upwind per velocity node with ghost
values supplied by the Maxwell wall condition at every sweep; the collision
step is either the exact BGK relaxation or an explicit Euler step of the
conservative quadrature operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import collision as coll
from .boundary import SlabDomain, maxwell_incoming
from .velocity_space import VelocityGrid, infinitesimal_maxwellian_field

OPERATORS = ("bgk", "full-q")
NEG_TOL = 1e-12


class PositivityError(RuntimeError):
    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass
class KineticState:
    G: np.ndarray              # (N_x, K)
    t: float
    eps: float
    delta: float
    grid: VelocityGrid
    domain: SlabDomain
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")
        if self.G.shape != (self.domain.N_x, self.grid.K):
            raise ValueError(f"G has shape {self.G.shape}, expected {(self.domain.N_x, self.grid.K)}")

    def mass(self) -> float:
        return float(self.domain.dx * np.sum(self.G @ self.grid.weights))

    def fluctuation(self) -> "FluctuationView":
        return FluctuationView(self.G, self.delta)


@dataclass(frozen=True)
class FluctuationView:
    G: np.ndarray
    delta: float

    @property
    def g(self):
        return (self.G - 1.0) / self.delta

    @property
    def N(self):
        return 1.0 + (self.G - 1.0) ** 2

    @property
    def g_tilde(self):
        return self.g / self.N

    @property
    def gamma_prime(self):
        N = self.N
        return 2.0 / N**2 - 1.0 / N


def _triple_fields(triple_in, x, D):
    if callable(triple_in):
        rho, u, theta = triple_in(x)
    else:
        rho, u, theta = triple_in
    n = x.size
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (n,)).copy()
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,)).copy()
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = np.full((n, D), float(u))
    elif u.ndim == 1 and u.size == n:
        # normal component only
        pad = np.zeros((n, D))
        pad[:, 0] = u
        u = pad
    elif u.ndim == 1 and u.size == D:
        u = np.broadcast_to(u, (n, D))
    u = u.reshape(n, -1)
    if u.shape[1] != D:
        raise ValueError(f"u has {u.shape[1]} components, grid has D={D}")
    return rho, u.copy(), theta


def init_state(triple_in, eps: float, delta: float, grid: VelocityGrid, domain: SlabDomain,
               G_min: float = 0.1) -> KineticState:
    """Well-prepared initial data ``1 + delta * (infinitesimal Maxwellian)``.

    ``triple_in`` is either a callable ``x -> (rho, u, theta)`` or a tuple of
    per-cell arrays.  The result is rescaled so that the total mass equals the
    slab length.
    """
    from .diagnostics import relative_entropy

    x = domain.x
    rho, u, theta = _triple_fields(triple_in, x, grid.D)
    g_in = infinitesimal_maxwellian_field(rho, u, theta, grid)
    G = 1.0 + delta * g_in
    gmin = float(G.min())
    if gmin < G_min:
        loc = np.unravel_index(np.argmin(G), G.shape)
        raise PositivityError(f"initial data violates positivity margin: min G = {gmin:.6g} < {G_min} "
                              f"at cell {loc[0]}, node {loc[1]}",
                              dump={"min": gmin, "cell": int(loc[0]), "node": int(loc[1])})
    mass = domain.dx * np.sum(G @ grid.weights)
    G = G * (domain.L / mass)
    state = KineticState(G=G, t=0.0, eps=eps, delta=delta, grid=grid, domain=domain)
    H = relative_entropy(state)
    state.meta.update(H_in=H, C_in=H / delta**2, mass_in=state.mass(), G_min=float(G.min()))
    return state


@dataclass
class CollisionStep:
    """Collision substep of the splitting, including its defect operator."""
    kind: str
    grid: VelocityGrid
    tables: coll.CollisionTables | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.kind not in OPERATORS:
            raise ValueError(f"unknown operator {self.kind!r}")
        if self.kind == "full-q" and self.tables is None:
            raise ValueError("full-q needs collision tables")

    @property
    def stiffness(self) -> float:
        """Largest loss frequency; explicit steps need ``dt/eps`` below its inverse."""
        if self.kind == "bgk":
            return 1.0
        return float(self.tables.loss_frequency.max())

    def operator(self, G):
        if self.kind == "bgk":
            return coll.bgk_relax(G, self.grid)
        return coll.collide(G, self.tables, self.backend)

    def advance(self, G, tau):
        if self.kind == "bgk":
            return coll.bgk_step(G, self.grid, tau)
        return G + tau * coll.collide(G, self.tables, self.backend)

    def dissipation(self, G):
        if self.kind == "bgk":
            return coll.bgk_dissipation(G, self.grid)
        return coll.entropy_dissipation(G, self.tables, self.backend)


def make_operator(kind: str, grid: VelocityGrid, kernel: coll.KernelSpec | None = None,
                  n_omega: int = 16, backend=None) -> CollisionStep:
    tables = None
    if kind == "full-q":
        tables = coll.build_tables(kernel or coll.KernelSpec("hard-sphere"), grid, n_omega)
    return CollisionStep(kind, grid, tables, backend)


def default_dt(grid: VelocityGrid, domain: SlabDomain, cfl: float = 0.4) -> float:
    return cfl * domain.dx / float(np.max(np.abs(grid.nodes[:, 0])))


def max_collision_dt(op: CollisionStep, eps: float, c_coll: float = 0.5) -> float:
    return math.inf if op.kind == "bgk" else c_coll * eps / op.stiffness


def wall_traces(G, grid: VelocityGrid, alpha: float):
    """Full traces on both walls for the current cell values."""
    left = maxwell_incoming(G[0], grid, "left", alpha)
    right = maxwell_incoming(G[-1], grid, "right", alpha)
    return left, right


def transport(G, grid: VelocityGrid, domain: SlabDomain, dt: float):
    """One upwind sweep over ``dt`` with Maxwell ghost values."""
    lam = grid.nodes[:, 0] * dt / domain.dx
    if np.max(np.abs(lam)) > 1.0 + 1e-12:
        raise ValueError("transport CFL number exceeds one")
    gl, gr = wall_traces(G, grid, domain.alpha)
    lp = np.maximum(lam, 0.0)
    lm = np.maximum(-lam, 0.0)
    up = np.vstack([gl[None, :], G[:-1]])
    down = np.vstack([G[1:], gr[None, :]])
    return G - lp * (G - up) - lm * (G - down)


def _check_positive(G, t, where):
    gmin = float(G.min())
    if gmin < -NEG_TOL:
        loc = np.unravel_index(np.argmin(G), G.shape)
        raise PositivityError(f"negative density {gmin:.3e} after {where} at t={t:.6g}",
                              dump={"min": gmin, "cell": int(loc[0]), "node": int(loc[1]), "t": t,
                                    "where": where})


def step(state: KineticState, dt: float, op: CollisionStep, cfl_num: float = 1.0,
         c_coll: float = 0.5) -> KineticState:
    grid, dom = state.grid, state.domain
    vmax = float(np.max(np.abs(grid.nodes[:, 0])))
    if dt > cfl_num * dom.dx / vmax * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} violates the transport CFL bound {cfl_num * dom.dx / vmax:.4g}")
    if dt > max_collision_dt(op, state.eps, c_coll) * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} violates the collision stiffness bound "
                         f"{max_collision_dt(op, state.eps, c_coll):.4g}")
    G = transport(state.G, grid, dom, 0.5 * dt)
    _check_positive(G, state.t, "transport")
    G = op.advance(G, dt / state.eps)
    _check_positive(G, state.t, "collision")
    G = transport(G, grid, dom, 0.5 * dt)
    _check_positive(G, state.t, "transport")
    return replace(state, G=G, t=state.t + dt)


def integrate(state: KineticState, horizon: float, op: CollisionStep, dt: float | None = None,
              cadence: float = 0.01, callback=None, cfl: float = 0.4, c_coll: float = 0.5):
    """Advance to ``horizon``; ``callback(state, index)`` runs at every output time.

    The step is shrunk so the horizon is hit exactly; the output cadence is
    rounded to a whole number of steps.  Returns the final state and the list
    of output times.
    """
    if dt is None:
        dt = min(default_dt(state.grid, state.domain, cfl), max_collision_dt(op, state.eps, c_coll))
    n_steps = max(1, int(math.ceil(horizon / dt - 1e-9)))
    dt = horizon / n_steps
    every = max(1, int(round(cadence / dt)))
    times = []
    if callback is not None:
        callback(state, 0)
    times.append(state.t)
    t0 = state.t
    for i in range(1, n_steps + 1):
        state = step(state, dt, op, c_coll=c_coll)
        state.t = t0 + i * dt
        if i % every == 0 or i == n_steps:
            if callback is not None:
                callback(state, len(times))
            times.append(state.t)
    state.meta["dt"] = dt
    state.meta["n_steps"] = n_steps
    return state, times


def weak_moment_residual(record: dict, zeta: int, chi, dchi, t1: float, t2: float, dx: float, L: float) -> float:
    """Discrete residual of the weak moment identity on ``[t1, t2]``.

    ``record`` holds arrays over output times: ``times``, ``m`` (T, N_x, Z)
    moments of the renormalized fluctuation, ``vm`` (T, N_x, Z) their
    normal fluxes, ``wall_m_left``/``wall_m_right`` (T, Z) renormalized trace
    fluxes and ``defect`` (T, N_x, Z).  ``x`` gives cell centres.
    """
    from scipy.integrate import trapezoid

    for key in ("times", "x", "m", "vm", "wall_m_left", "wall_m_right", "defect"):
        if key not in record:
            raise ValueError(f"record lacks {key!r}")
    t = np.asarray(record["times"])
    sel = (t >= t1 - 1e-12) & (t <= t2 + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise ValueError("need at least two output times inside the window")
    ts = t[sel]
    x = np.asarray(record["x"])
    cx = chi(x)
    dcx = dchi(x)
    m = np.asarray(record["m"])[sel][..., zeta]
    vm = np.asarray(record["vm"])[sel][..., zeta]
    dfc = np.asarray(record["defect"])[sel][..., zeta]
    wl = np.asarray(record["wall_m_left"])[sel][:, zeta]
    wr = np.asarray(record["wall_m_right"])[sel][:, zeta]
    lhs = dx * (cx @ m[-1] - cx @ m[0])
    lhs += trapezoid(chi(np.array(0.0)) * wl + chi(np.array(L)) * wr, ts)
    lhs -= trapezoid(dx * (vm @ dcx), ts)
    rhs = trapezoid(dx * (dfc @ cx), ts)
    return float(lhs - rhs)
