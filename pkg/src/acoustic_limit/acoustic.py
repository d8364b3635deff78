"""Linear acoustic system on the slab with impermeable walls.

Unknowns are the density, normal velocity and temperature fluctuations on
cell centres.  The modal solver expands ``rho`` and ``theta`` in cosines and
``u`` in sines, which builds ``u = 0`` at the walls into the basis; the
combination ``rho - (D/2) theta`` does not move and ``p = rho + theta`` obeys
a wave equation with speed ``sqrt((D+2)/D)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft
from scipy.interpolate import CubicSpline

from .velocity_space import VelocityGrid, fluid_moments


@dataclass
class AcousticState:
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    D: int
    L: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if not (self.rho.shape == self.u.shape == self.theta.shape and self.rho.ndim == 1):
            raise ValueError("rho, u and theta must be 1D arrays of equal length")
        if not all(np.all(np.isfinite(a)) for a in (self.rho, self.u, self.theta)):
            raise ValueError("acoustic fields must be finite")

    @property
    def N(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.dx

    def stationary(self) -> np.ndarray:
        return self.rho - 0.5 * self.D * self.theta


def sound_speed(D: int) -> float:
    return math.sqrt((D + 2.0) / D)


def energy(state: AcousticState) -> float:
    return 0.5 * state.dx * float(np.sum(state.rho**2 + state.u**2 + 0.5 * state.D * state.theta**2))


def project_initial(g_in, grid: VelocityGrid, L: float = 1.0) -> AcousticState:
    """Cell-wise fluid moments of a fluctuation field ``(N_x, K)``."""
    rho, u, theta = fluid_moments(np.atleast_2d(g_in), grid)
    return AcousticState(rho=rho, u=u[:, 0], theta=theta, D=grid.D, L=L)


def solve_modal(initial: AcousticState, t: float) -> AcousticState:
    """Exact evolution of the cell-centre expansion.

    The highest sine mode has no cosine partner that is visible on cell
    centres, so fields with content at the grid Nyquist scale lose that part
    of their energy; resolved data is propagated exactly.
    """
    N, D, L = initial.N, initial.D, initial.L
    c = sound_speed(D)
    p = initial.rho + initial.theta
    s = initial.stationary()
    P = fft.dct(p, type=2, norm="ortho")
    U = fft.dst(initial.u, type=2, norm="ortho")     # entry j is sine mode j+1
    k = np.pi * np.arange(N + 1) / L
    P_ext = np.append(P, 0.0)                         # cosine mode N vanishes on centres
    U_ext = np.concatenate([[0.0], U])
    cw, sw = np.cos(c * k * t), np.sin(c * k * t)
    P_t = P_ext * cw - c * U_ext * sw
    U_t = U_ext * cw + P_ext / c * sw
    p_t = fft.idct(P_t[:N], type=2, norm="ortho")
    u_t = fft.idst(U_t[1:], type=2, norm="ortho")
    theta = 2.0 * (p_t - s) / (D + 2.0)
    return AcousticState(rho=p_t - theta, u=u_t, theta=theta, D=D, L=L, t=initial.t + t)


def _rhs(rho, u, theta, D, dx):
    p = rho + theta
    # walls: u odd, rho and theta even
    ue = np.concatenate([[-u[0]], u, [-u[-1]]])
    pe = np.concatenate([[p[0]], p, [p[-1]]])
    fu = 0.5 * (ue[:-1] + ue[1:])
    fp = 0.5 * (pe[:-1] + pe[1:])
    du = np.diff(fu) / dx
    dp = np.diff(fp) / dx
    return -du, -dp, -(2.0 / D) * du


def solve_fv(initial: AcousticState, t: float, N_x: int | None = None, dt: float | None = None,
             cadence: float | None = None):
    """Central-flux finite volumes with classical RK4 in time.

    ``N_x`` other than the initial resolution resamples the initial fields
    through their modal expansion.  With ``cadence`` a list of intermediate
    states is returned together with the final one.
    """
    state = initial
    if N_x is not None and N_x != initial.N:
        state = resample(initial, N_x)
    D, dx = state.D, state.dx
    c = sound_speed(D)
    if dt is None:
        dt = 0.5 * dx / c
    if dt > dx / c * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} violates the CFL bound {dx / c:.4g}")
    n = max(1, int(math.ceil(t / dt - 1e-9))) if t > 0 else 0
    h = t / n if n else 0.0
    every = max(1, int(round(cadence / h))) if (cadence and n) else None
    y = [state.rho.copy(), state.u.copy(), state.theta.copy()]
    out = [replace(state)] if every else None

    def f(z):
        return _rhs(z[0], z[1], z[2], D, dx)

    for i in range(1, n + 1):
        k1 = f(y)
        k2 = f([a + 0.5 * h * b for a, b in zip(y, k1)])
        k3 = f([a + 0.5 * h * b for a, b in zip(y, k2)])
        k4 = f([a + h * b for a, b in zip(y, k3)])
        y = [a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        if every and (i % every == 0 or i == n):
            out.append(AcousticState(y[0].copy(), y[1].copy(), y[2].copy(), D, state.L, state.t + i * h))
    final = AcousticState(y[0], y[1], y[2], D, state.L, state.t + t)
    return (final, out) if every else final


def resample(state: AcousticState, N_x: int) -> AcousticState:
    """Evaluate the cosine/sine expansion of ``state`` on a different cell grid."""
    N = state.N
    x = (np.arange(N_x) + 0.5) * state.L / N_x
    k = np.pi * np.arange(N + 1) / state.L
    scale_c = np.full(N, math.sqrt(2.0 / N))
    scale_c[0] = math.sqrt(1.0 / N)
    scale_s = np.full(N, math.sqrt(2.0 / N))
    scale_s[-1] = math.sqrt(1.0 / N)
    C = np.cos(np.outer(x, k[:N])) * scale_c
    S = np.sin(np.outer(x, k[1:])) * scale_s

    def cos_series(f):
        return C @ fft.dct(f, type=2, norm="ortho")

    return AcousticState(rho=cos_series(state.rho), u=S @ fft.dst(state.u, type=2, norm="ortho"),
                         theta=cos_series(state.theta), D=state.D, L=state.L, t=state.t)


def mode_amplitude(state: AcousticState, n: int = 1, field: str = "p") -> float:
    """Projection of ``rho + theta`` (or another field) on ``cos(n pi x / L)``."""
    f = state.rho + state.theta if field == "p" else getattr(state, field)
    return 2.0 / state.L * state.dx * float(np.sum(f * np.cos(n * np.pi * state.x / state.L)))


def measure_period(times, amplitude) -> float:
    """Period from successive downward zero crossings of a sampled oscillation."""
    times = np.asarray(times, dtype=float)
    a = np.asarray(amplitude, dtype=float)
    spl = CubicSpline(times, a)
    roots = spl.roots(extrapolate=False)
    down = [r for r in roots if spl(r, 1) < 0]
    if len(down) < 2:
        raise ValueError("need two downward zero crossings to measure a period")
    return float(np.mean(np.diff(down)))
