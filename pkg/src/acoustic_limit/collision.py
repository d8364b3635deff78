"""Collision kernels, discrete collision operator, kernel audit and BGK surrogate.

The quadrature collision operator works on uniform tensor grids.  For a
lattice offset ``o = (v_1 - v)/h`` and an angle node ``omega`` the
post-collision velocities are ``v + h d1`` and ``v + h d2`` with
``d1 = (omega . o) omega`` and ``d2 = o - d1``.  Angle nodes that produce the
same unordered pair ``{d1, d2}`` for the same offset are merged into one
*class*; a class applies to every pre-collision index ``k`` whose
interpolation stencil stays on the grid (its validity box).  Off-grid values
are obtained with nested multilinear interpolation, which reproduces constants
exactly, and the result is projected onto the complement of the collision
invariants.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import integrate, signal, special

from . import _backend
from .velocity_space import VelocityGrid

FAMILIES = ("hard-sphere", "vhs", "maxwell")
MOLLIFY = 1e-6
_SNAP = 1e-9


@dataclass(frozen=True)
class KernelSpec:
    """Kernel ``b = Z_b C |V|^beta |omega . n|``.

    ``hard-sphere`` fixes ``beta = 1`` and ``maxwell`` fixes ``beta = 0``;
    ``vhs`` takes ``beta`` in ``(-D, 1]``.  ``Z_b`` is ``None`` until the
    kernel has been normalized on a grid.
    """
    family: str = "hard-sphere"
    beta: float | None = None
    C_kernel: float = 1.0
    Z_b: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        fixed = {"hard-sphere": 1.0, "maxwell": 0.0}
        if self.family in fixed:
            if self.beta is not None and self.beta != fixed[self.family]:
                raise ValueError(f"{self.family} kernel has beta={fixed[self.family]}")
            object.__setattr__(self, "beta", fixed[self.family])
        elif self.beta is None:
            raise ValueError("vhs kernel needs an exponent beta")
        if not (-3.0 < self.beta <= 1.0):
            raise ValueError(f"beta must lie in (-3, 1], got {self.beta}")
        if not self.C_kernel > 0:
            raise ValueError("C_kernel must be positive")

    @property
    def normalized(self) -> bool:
        return self.Z_b is not None

    @property
    def scale(self) -> float:
        return self.C_kernel * (1.0 if self.Z_b is None else self.Z_b)

    def to_dict(self) -> dict:
        return asdict(self)


def _speed_power(r, beta):
    if beta < 0:
        r = np.maximum(r, MOLLIFY)
    return r**beta


def kernel_eval(spec: KernelSpec, omega, V) -> float:
    omega = np.asarray(omega, dtype=float)
    V = np.asarray(V, dtype=float)
    if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise ValueError("omega must be a unit vector")
    if not np.all(np.isfinite(V)):
        raise ValueError("relative velocity must be finite")
    r = float(np.linalg.norm(V))
    if r == 0.0:
        return 0.0
    cos = abs(float(omega @ V)) / r
    return float(spec.scale * _speed_power(r, spec.beta) * cos)


def sphere_quadrature(D: int, n_omega: int = 16):
    """Angle nodes and weights with total weight ``|S^{D-1}|``."""
    if D == 1:
        return np.array([[-1.0], [1.0]]), np.ones(2)
    if D == 2:
        phi = 2.0 * np.pi * np.arange(n_omega) / n_omega
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(n_omega, 2.0 * np.pi / n_omega)
    if D == 3:
        # 26-point Lebedev rule (degree 7)
        pts, wts = [], []
        for a in range(3):
            for s in (-1.0, 1.0):
                e = np.zeros(3)
                e[a] = s
                pts.append(e)
                wts.append(1.0 / 21.0)
        for a in range(3):
            for b in range(a + 1, 3):
                for sa in (-1.0, 1.0):
                    for sb in (-1.0, 1.0):
                        e = np.zeros(3)
                        e[a], e[b] = sa, sb
                        pts.append(e / math.sqrt(2.0))
                        wts.append(4.0 / 105.0)
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                for sz in (-1.0, 1.0):
                    pts.append(np.array([sx, sy, sz]) / math.sqrt(3.0))
                    wts.append(9.0 / 280.0)
        return np.array(pts), 4.0 * np.pi * np.array(wts)
    raise ValueError(f"unsupported dimension {D}")


def sphere_abs_cos(D: int) -> float:
    """``int_{S^{D-1}} |omega . n| d omega``."""
    return {1: 2.0, 2: 4.0, 3: 2.0 * np.pi}[D]


@dataclass(eq=False)
class CollisionTables:
    grid: VelocityGrid
    spec: KernelSpec
    omega: np.ndarray
    omega_weights: np.ndarray
    offset: np.ndarray        # (C, D) integer lattice offsets
    d1: np.ndarray            # (C, D) displacement of v' in grid units
    d2: np.ndarray
    coef: np.ndarray          # (C,) normalized angular weight of the class
    trivial: np.ndarray       # (C,) classes with {v', v1'} = {v, v1}
    lo: np.ndarray            # (C, 3) validity box, padded to three axes
    hi: np.ndarray
    strides3: np.ndarray
    koff: np.ndarray
    base1: np.ndarray
    na1: np.ndarray
    st1: np.ndarray
    fr1: np.ndarray
    base2: np.ndarray
    na2: np.ndarray
    st2: np.ndarray
    fr2: np.ndarray
    active: np.ndarray        # indices of non-trivial classes
    t_k: np.ndarray           # triple pre-collision index
    t_c: np.ndarray           # triple class
    mu: np.ndarray            # triple measure coef * w_k * w_k1
    loss_frequency: np.ndarray
    attenuation: np.ndarray
    bbar_offsets: np.ndarray  # b-bar on the offset lattice, shape (2n-1,)*D
    basis: np.ndarray         # w-orthonormal basis of the invariants, (K, D+2)
    report: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.grid.K

    @property
    def w(self) -> np.ndarray:
        return self.grid.weights

    @property
    def n_triples(self) -> int:
        return self.t_k.size

    @property
    def t_k1(self) -> np.ndarray:
        return self.t_k + self.koff[self.t_c]

    def active_triples(self):
        if "active_triples" not in self.cache:
            keep = ~self.trivial[self.t_c]
            self.cache["active_triples"] = (self.t_k[keep], self.t_c[keep])
        return self.cache["active_triples"]

    def project(self, Q):
        """Remove the invariant components of ``Q`` (velocity on the last axis)."""
        B = self.basis
        return Q - (Q * self.w) @ B @ B.T


def _offsets(D, n):
    rng = np.arange(-(n - 1), n)
    O = np.stack([a.ravel() for a in np.meshgrid(*([rng] * D), indexing="ij")], axis=1)
    return O[np.any(O != 0, axis=1)]


def _lex_greater(a, b):
    res = np.zeros(a.shape[:-1], dtype=bool)
    for j in reversed(range(a.shape[-1])):
        res = (a[..., j] > b[..., j]) | ((a[..., j] == b[..., j]) & res)
    return res


def _split(d):
    fl = np.floor(d + _SNAP)
    f = d - fl
    f[f < _SNAP] = 0.0
    return fl.astype(np.int64), f


def _invariant_basis(grid):
    Z = grid.invariants().T
    sw = np.sqrt(grid.weights)
    q, _ = np.linalg.qr(Z * sw[:, None])
    return q / sw[:, None]


def _bbar_lattice(spec, grid, omega, ow):
    """Discrete-angle b-bar on the offset lattice and its cell-averaged self term."""
    D, n, h = grid.D, grid.n, grid.spacing
    rng = np.arange(-(n - 1), n) * h
    V = np.stack([a.ravel() for a in np.meshgrid(*([rng] * D), indexing="ij")], axis=1)
    r = np.linalg.norm(V, axis=1)
    proj = np.abs(V @ omega.T) @ ow
    bb = np.zeros_like(r)
    nz = r > 0
    bb[nz] = spec.scale * _speed_power(r[nz], spec.beta) * proj[nz] / r[nz]
    # the coincident node carries the cell average of the integrable profile
    m = 32
    sub = (np.arange(m) + 0.5) / m * h - 0.5 * h
    S = np.stack([a.ravel() for a in np.meshgrid(*([sub] * D), indexing="ij")], axis=1)
    rs = np.linalg.norm(S, axis=1)
    self_term = float(np.mean(spec.scale * _speed_power(rs, spec.beta) * (np.abs(S @ omega.T) @ ow) / rs))
    bb = bb.reshape((2 * n - 1,) * D)
    return bb, self_term


def _attenuation(grid, bbar, self_term):
    n, D = grid.n, grid.D
    wg = grid.weights.reshape((n,) * D)
    full = signal.fftconvolve(wg, bbar, mode="full")
    sl = tuple(slice(n - 1, 2 * n - 1) for _ in range(D))
    centre = tuple([n - 1] * D)
    a = full[sl].ravel() - grid.weights * bbar[centre] + grid.weights * self_term
    return a


_TABLE_CACHE: dict = {}


def build_tables(spec: KernelSpec, grid: VelocityGrid, n_omega: int = 16,
                 use_cache: bool = True) -> CollisionTables:
    """Precompute collision classes and normalize the kernel on ``grid``."""
    if not grid.uniform:
        raise ValueError("collision tables need a uniform velocity grid")
    if grid.D > 1 and not (-grid.D < spec.beta):
        raise ValueError(f"beta must exceed -D={-grid.D}")
    key = (spec.family, spec.beta, spec.C_kernel, grid.D, grid.n, grid.v_max,
           grid.weight_rule, n_omega)
    if use_cache and key in _TABLE_CACHE:
        return _TABLE_CACHE[key]

    D, n, h = grid.D, grid.n, grid.spacing
    base_spec = replace(spec, Z_b=None)
    omega, ow = sphere_quadrature(D, n_omega)
    O = _offsets(D, n)
    P = O.shape[0]
    s = O @ omega.T                                     # (P, M)
    d1 = s[:, :, None] * omega[None, :, :]
    d2 = O[:, None, :] - d1
    r = np.linalg.norm(O, axis=1) * h
    bw = (base_spec.scale * _speed_power(r, spec.beta))[:, None] * (np.abs(s) / np.linalg.norm(O, axis=1)[:, None]) * ow[None, :]

    q1 = np.rint(d1 * 1e6).astype(np.int64)
    q2 = np.rint(d2 * 1e6).astype(np.int64)
    swap = _lex_greater(q1, q2)
    qa = np.where(swap[..., None], q2, q1)
    qb = np.where(swap[..., None], q1, q2)
    da = np.where(swap[..., None], d2, d1)
    pid = np.broadcast_to(np.arange(P)[:, None], s.shape)
    rows = np.concatenate([pid[..., None], qa, qb], axis=-1).reshape(-1, 1 + 2 * D)
    uniq, first, inv = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    weight = np.bincount(inv, weights=bw.ravel())
    keep = weight > 0
    cls_p = uniq[:, 0]
    offset = O[cls_p]
    cd1 = da.reshape(-1, D)[first]
    cd2 = offset - cd1

    fl1, f1 = _split(cd1)
    fl2, f2 = _split(cd2)
    e1 = (f1 > 0).astype(np.int64)
    e2 = (f2 > 0).astype(np.int64)
    lo = np.maximum.reduce([np.zeros_like(offset), -offset, -fl1, -fl2])
    hi = np.minimum.reduce([np.full_like(offset, n - 1), n - 1 - offset, n - 1 - fl1 - e1, n - 1 - fl2 - e2])
    keep &= np.all(lo <= hi, axis=1)
    trivial_all = (np.all(fl1 == 0, axis=1) & np.all(f1 == 0, axis=1)) | \
                  (np.all(fl2 == 0, axis=1) & np.all(f2 == 0, axis=1))

    sel = np.nonzero(keep)[0]
    offset, cd1, cd2 = offset[sel], cd1[sel], cd2[sel]
    fl1, f1, fl2, f2 = fl1[sel], f1[sel], fl2[sel], f2[sel]
    lo, hi, weight, trivial = lo[sel], hi[sel], weight[sel], trivial_all[sel]
    C = sel.size

    strides = n ** np.arange(D - 1, -1, -1, dtype=np.int64)
    pad = 3 - D
    lo3 = np.zeros((C, 3), dtype=np.intp)
    hi3 = np.zeros((C, 3), dtype=np.intp)
    lo3[:, pad:] = lo
    hi3[:, pad:] = hi
    strides3 = np.zeros(3, dtype=np.intp)
    strides3[pad:] = strides

    def active_axes(f):
        na = np.zeros(C, dtype=np.intc)
        st = np.zeros((C, 3), dtype=np.intp)
        fr = np.zeros((C, 3))
        for c in range(C):
            ax = np.nonzero(f[c] > 0)[0]
            na[c] = ax.size
            st[c, :ax.size] = strides[ax]
            fr[c, :ax.size] = f[c, ax]
        return na, st, fr

    na1, st1, fr1 = active_axes(f1)
    na2, st2, fr2 = active_axes(f2)

    # expand classes into triples
    tk_parts, tc_parts = [], []
    for c in range(C):
        idx = np.zeros(1, dtype=np.int64)
        for a in range(D):
            idx = (idx[:, None] + strides[a] * np.arange(lo[c, a], hi[c, a] + 1)[None, :]).ravel()
        tk_parts.append(idx)
        tc_parts.append(np.full(idx.size, c, dtype=np.int64))
    t_k = np.concatenate(tk_parts).astype(np.intp)
    t_c = np.concatenate(tc_parts).astype(np.intp)
    koff = (offset @ strides).astype(np.intp)
    w = grid.weights
    t_k1 = t_k + koff[t_c]
    raw_mu = weight[t_c] * w[t_k] * w[t_k1]
    mass = float(raw_mu.sum())
    Z_b = 1.0 / mass
    nspec = replace(spec, Z_b=Z_b)
    coef = weight * Z_b
    mu = raw_mu * Z_b
    loss = np.bincount(t_k, weights=coef[t_c] * w[t_k1], minlength=grid.K)

    bbar, self_term = _bbar_lattice(nspec, grid, omega, ow)
    att = _attenuation(grid, bbar, self_term)

    res_e = (h**2) * np.sum(f1 * (1 - f1) + f2 * (1 - f2), axis=1)
    report = {
        "n_omega": int(omega.shape[0]),
        "n_offsets": int(P),
        "n_classes": int(C),
        "n_active_classes": int(np.count_nonzero(~trivial)),
        "n_triples": int(t_k.size),
        "pruned_classes": int(uniq.shape[0] - C),
        "Z_b": Z_b,
        "momentum_residual_max": float(np.max(np.abs(cd1 + cd2 - offset))) * h if C else 0.0,
        "energy_interp_residual_max": float(res_e.max()) if C else 0.0,
        "mu_mass": float(mu.sum()),
        "grid": {"D": D, "n": n, "v_max": grid.v_max, "weight_rule": grid.weight_rule},
    }
    tables = CollisionTables(
        grid=grid, spec=nspec, omega=omega, omega_weights=ow, offset=offset, d1=cd1, d2=cd2,
        coef=coef, trivial=trivial, lo=lo3, hi=hi3, strides3=strides3, koff=koff,
        base1=(fl1 @ strides).astype(np.intp), na1=na1, st1=st1, fr1=fr1,
        base2=(fl2 @ strides).astype(np.intp), na2=na2, st2=st2, fr2=fr2,
        active=np.nonzero(~trivial)[0].astype(np.intp), t_k=t_k, t_c=t_c, mu=mu,
        loss_frequency=loss, attenuation=att, bbar_offsets=bbar,
        basis=_invariant_basis(grid), report=report)
    if use_cache:
        _TABLE_CACHE[key] = tables
    return tables


def normalize_kernel(spec: KernelSpec, grid: VelocityGrid, n_omega: int = 16) -> KernelSpec:
    return build_tables(spec, grid, n_omega).spec


def attenuation(spec: KernelSpec, grid: VelocityGrid, n_omega: int = 16) -> np.ndarray:
    """Attenuation ``a_k`` of the normalized kernel at every node."""
    return build_tables(spec, grid, n_omega).attenuation.copy()


def _as_columns(G, K):
    G = np.asarray(G, dtype=float)
    if G.shape[-1] != K:
        raise ValueError(f"field has {G.shape[-1]} velocity values, grid has {K}")
    if np.any(G < -1e-12):
        raise ValueError("negative relative density; positivity failed upstream")
    return G


def collide_raw(G, tables: CollisionTables, backend=None):
    """Unprojected quadrature collision operator (velocity on the last axis)."""
    G = _as_columns(G, tables.K)
    cols = np.ascontiguousarray(np.atleast_2d(G).T)
    Q = _backend.collide_raw(cols, tables, backend).T
    return Q.reshape(G.shape)


def collide(G, tables: CollisionTables, backend=None):
    """Conservative discrete ``Q(G, G)``, exactly orthogonal to the invariants."""
    return tables.project(collide_raw(G, tables, backend))


def entropy_dissipation(G, tables: CollisionTables, backend=None):
    """``1/4 <<log(G'G1'/(G G1)) (G'G1' - G G1)>>`` per spatial cell."""
    G = _as_columns(G, tables.K)
    cols = np.ascontiguousarray(np.atleast_2d(G).T)
    R = 0.25 * _backend.dissipation_sum(cols, tables, 1e-300, backend)
    return R if G.ndim > 1 else float(R[0])


def _triple_interp(f, tables, k, c):
    from ._collision_py import _interp
    f = np.asarray(f, dtype=float)
    col = f.reshape(tables.K, -1)
    I1 = _interp(col, k + tables.base1[c], tables.st1[c], tables.fr1[c], (0, 1, 2))
    I2 = _interp(col, k + tables.base2[c], tables.st2[c], tables.fr2[c], (0, 1, 2))
    return I1[:, 0], I2[:, 0]


def interpolate_post(f, tables: CollisionTables):
    """Interpolated post-collision values ``(f', f1')`` on every triple."""
    return _triple_interp(f, tables, tables.t_k, tables.t_c)


def post_velocities(tables: CollisionTables):
    """Exact (off-grid) post-collision velocities on every triple."""
    h = tables.grid.spacing
    v = tables.grid.nodes[tables.t_k]
    return v + h * tables.d1[tables.t_c], v + h * tables.d2[tables.t_c]


def mu_average(Xi, tables: CollisionTables) -> float:
    Xi = np.asarray(Xi, dtype=float)
    if Xi.shape != (tables.n_triples,):
        raise ValueError(f"expected {tables.n_triples} triple values, got shape {Xi.shape}")
    return float(Xi @ tables.mu)


def scaled_q(G, eps: float, delta: float, tables: CollisionTables, conservative: bool = True):
    """Scaled collision integrand on every triple for a single velocity field.

    With ``conservative=True`` the per-node excess removed by the invariant
    projection is spread over the triples of that node, so the integrand
    integrates to the conservative operator and its mu-average vanishes.
    """
    if not (eps > 0 and delta > 0):
        raise ValueError("eps and delta must be positive")
    G = _as_columns(G, tables.K)
    if G.ndim != 1:
        raise ValueError("scaled_q takes a single velocity field")
    k, c = tables.t_k, tables.t_c
    I1, I2 = interpolate_post(G, tables)
    q = I1 * I2 - G[k] * G[k + tables.koff[c]]
    if conservative:
        Qr = collide_raw(G, tables)
        excess = Qr - tables.project(Qr)
        q = q - (excess / tables.loss_frequency)[k]
    return q / (math.sqrt(eps) * delta)


def interpolation_error_bound(G, tables: CollisionTables) -> np.ndarray:
    """Per-node estimate of the interpolation error in the gain term.

    For a relative density whose exact post-collision product equals the
    pre-collision one (any exponential of an invariant) this bounds ``|Q|``.
    Multilinear interpolation errs by at most ``f(1-f)/2`` times the second
    difference along each active axis; second differences are taken as the
    maximum over the interpolation stencil.
    """
    G = _as_columns(G, tables.K)
    grid = tables.grid
    n, D = grid.n, grid.D
    Gg = G.reshape((n,) * D)
    dd = []
    for a in range(D):
        d2 = np.abs(np.diff(Gg, 2, axis=a))
        d2 = np.concatenate([np.take(d2, [0], axis=a), d2, np.take(d2, [-1], axis=a)], axis=a)
        dd.append(d2.ravel())
    k, c = tables.active_triples()
    err = []
    for base, st, fr, na in ((tables.base1, tables.st1, tables.fr1, tables.na1),
                             (tables.base2, tables.st2, tables.fr2, tables.na2)):
        p0 = k + base[c]
        corners = [p0]
        for j in range(3):
            corners = corners + [p + st[c, j] for p in corners]
        e = np.zeros(k.size)
        fa = fr[c]
        strides = grid.n ** np.arange(D - 1, -1, -1)
        for j in range(3):
            if not np.any(fa[:, j] > 0):
                continue
            axis = np.searchsorted(-strides, -st[c, j])
            m = np.zeros(k.size)
            for a in range(D):
                sel = axis == a
                if np.any(sel):
                    m[sel] = np.max([dd[a][p[sel]] for p in corners], axis=0)
            e += 0.5 * fa[:, j] * (1 - fa[:, j]) * m
        err.append(e)
    I1, I2 = _triple_interp(G, tables, k, c)
    k1 = k + tables.koff[c]
    contrib = tables.coef[c] * tables.w[k1] * (err[0] * np.abs(I2) + err[1] * np.abs(I1) + err[0] * err[1])
    return np.bincount(k, weights=contrib, minlength=tables.K)


# --- gain operator ---------------------------------------------------------

def gain_matrix(tables: CollisionTables) -> np.ndarray:
    """Dense discrete ``K+`` with ``(K+ g)_k = (2 nu_k)^{-1} sum coef w_k1 (g' + g1')``."""
    grid = tables.grid
    K, D = grid.K, grid.D
    k, c = tables.t_k, tables.t_c
    k1 = k + tables.koff[c]
    cw = tables.coef[c] * tables.w[k1]
    M = np.zeros((K, K))
    for base, st, fr in ((tables.base1, tables.st1, tables.fr1),
                         (tables.base2, tables.st2, tables.fr2)):
        p0 = k + base[c]
        corners = [(p0, np.ones(k.size))]
        for j in range(3):
            f = fr[c, j]
            if not np.any(f > 0):
                continue
            corners = [(p, lam * (1 - f)) for p, lam in corners] + \
                      [(p + st[c, j], lam * f) for p, lam in corners]
        for p, lam in corners:
            _accumulate(M, k, p, cw * lam)
    return M / (2.0 * tables.loss_frequency[:, None])


def _accumulate(M, rows, cols, vals):
    K = M.shape[0]
    M += np.bincount(rows * K + cols, weights=vals, minlength=K * K).reshape(K, K)


def gain_norm(tables: CollisionTables, n_values: int = 20, symmetric: bool = True):
    """Norm and leading singular values of ``K+`` on ``L^2(nu w)``.

    Interpolation breaks the exact pairing of pre- and post-collision states,
    so the raw matrix is not self-adjoint.  With ``symmetric=True`` the gain
    measure ``w_k nu_k K+_kj`` is replaced by its symmetric part and ``nu`` by
    the matching row sums, which restores detailed balance.
    """
    A = gain_matrix(tables)
    nu = tables.loss_frequency
    w = tables.w
    if symmetric:
        Wm = (w * nu)[:, None] * A
        Wm = 0.5 * (Wm + Wm.T)
        nu = Wm.sum(axis=1) / w
        A = Wm / (w * nu)[:, None]
    sw = np.sqrt(nu * w)
    S = sw[:, None] * A / sw[None, :]
    sv = np.linalg.svd(S, compute_uv=False)
    return float(sv[0]), sv[:n_values]


# --- assumption audit --------------------------------------------------------

@dataclass
class AuditReport:
    kernel: dict
    resolution: dict
    b_limit: dict
    a_lower: dict
    b_bound: dict
    saturation: dict
    gain: dict
    truncation: str

    @property
    def passed(self) -> bool:
        return all(part["pass"] for part in
                   (self.b_limit, self.a_lower, self.b_bound, self.saturation, self.gain))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _radial_attenuation(spec: KernelSpec, D: int, r: float) -> float:
    """Continuous ``a(|v| = r)`` by one-dimensional quadrature in ``|V|``."""
    A = sphere_abs_cos(D) * spec.scale
    beta = spec.beta
    e = np.exp

    if D == 1:
        def f(V):
            return 0.5 * A * abs(V) ** beta * (e(-0.5 * (r + V) ** 2) + e(-0.5 * (r - V) ** 2)) / math.sqrt(2 * math.pi)
        return integrate.quad(f, 0, r + 12, limit=200)[0]
    if D == 2:
        def f(rho):
            return A * rho ** (1 + beta) * e(-0.5 * (rho - r) ** 2) * special.ive(0, r * rho)
    else:
        def f(rho):
            if r * rho < 1e-8:
                kern = 2.0 * e(-0.5 * (r * r + rho * rho))
            else:
                kern = (e(-0.5 * (rho - r) ** 2) - e(-0.5 * (rho + r) ** 2)) / (r * rho)
            return A * rho ** (2 + beta) * kern / math.sqrt(2 * math.pi)
    pts = [r] if r > 0 else None
    return integrate.quad(f, 0, r + 12, points=pts, limit=200)[0]


def radial_attenuation_oracle(spec: KernelSpec, D: int, radii) -> np.ndarray:
    return np.array([_radial_attenuation(spec, D, float(r)) for r in radii])


def fit_power(speed2, a):
    """Least-squares ``log a = log C + beta log(1 + |v|^2)``; ``C`` is the lower envelope."""
    x = np.log1p(speed2)
    beta, _ = np.polyfit(x, np.log(a), 1)
    C = float(np.min(a / (1 + speed2) ** beta))
    return float(beta), C


def _bbar_continuous(spec, D, r):
    return sphere_abs_cos(D) * spec.scale * _speed_power(np.asarray(r, dtype=float), spec.beta)


def _b_limit_curve(spec, D, radii):
    # integral of b-bar over the unit ball centred at 0, evaluated at v = r e_1
    xg, wg = np.polynomial.legendre.leggauss(48)
    out = []
    for r in radii:
        if D == 1:
            x = xg
            val = np.sum(wg * _bbar_continuous(spec, D, np.abs(x - r)))
        elif D == 2:
            rho = 0.5 * (xg + 1)
            phi = np.pi * (xg + 1)
            R, P = np.meshgrid(rho, phi, indexing="ij")
            dist = np.sqrt((R * np.cos(P) - r) ** 2 + (R * np.sin(P)) ** 2)
            W = np.outer(0.5 * wg * rho, np.pi * wg)
            val = np.sum(W * _bbar_continuous(spec, D, dist))
        else:
            rho = 0.5 * (xg + 1)
            mu = xg
            R, MU = np.meshgrid(rho, mu, indexing="ij")
            dist = np.sqrt(np.maximum(R * R + r * r - 2 * R * r * MU, 0.0))
            W = np.outer(0.5 * wg * rho**2, wg) * 2 * np.pi
            val = np.sum(W * _bbar_continuous(spec, D, dist))
        out.append(val / (1 + r * r))
    return np.array(out)


def audit_assumptions(spec: KernelSpec, grid: VelocityGrid, s: float = 2.0,
                      delta_list=(1.0, 0.1, 0.01), n_omega: int = 16,
                      max_pairs: int = 400_000, seed: int = 0) -> AuditReport:
    """Numerical check of the kernel assumptions on the truncated grid."""
    if not spec.normalized:
        raise ValueError("audit needs a normalized kernel (see normalize_kernel)")
    if not s > 1:
        raise ValueError("s must exceed 1")
    tables = build_tables(spec, grid, n_omega)
    if not math.isclose(tables.spec.Z_b, spec.Z_b, rel_tol=1e-9):
        raise ValueError("kernel was normalized on a different grid")
    D, n = grid.D, grid.n
    s2 = grid.speed2
    speed = np.sqrt(s2)
    a = tables.attenuation
    res = {"D": D, "n_per_axis": n, "v_max": grid.v_max, "weight_rule": grid.weight_rule,
           "n_omega": tables.report["n_omega"], "n_triples": tables.n_triples}

    radii = np.linspace(0.0, grid.v_max, 25)
    curve = _b_limit_curve(tables.spec, D, radii)
    tail = radii >= 2.0
    b_limit = {"radii": radii.tolist(), "values": curve.tolist(),
               "pass": bool(np.all(np.diff(curve[tail]) < 0) and curve[-1] < curve[tail][0]),
               "resolution": res}

    beta_a, C_a = fit_power(s2, a)
    uniq_r = np.unique(np.round(speed, 12))
    oracle = radial_attenuation_oracle(tables.spec, D, uniq_r)
    beta_o, C_o = fit_power(uniq_r**2, oracle)
    rel = np.abs(a - np.interp(speed, uniq_r, oracle)) / oracle.min()
    a_lower = {"beta_a": beta_a, "C_a": C_a, "beta_oracle": beta_o, "C_oracle": C_o,
               "a_min": float(a.min()), "a_max": float(a.max()),
               "max_rel_dev_from_oracle": float(rel.max()),
               "pass": bool(C_a > 0 and np.all(a >= C_a * (1 + s2) ** beta_a * (1 - 1e-12))),
               "resolution": res}

    bb = tables.bbar_offsets
    wg = grid.weights.reshape((n,) * D)
    ag = a.reshape((n,) * D)
    num = signal.fftconvolve(wg * ag ** (1 - s), bb**s, mode="full")
    sl = tuple(slice(n - 1, 2 * n - 1) for _ in range(D))
    integ = np.maximum(num[sl].ravel(), 0.0) / a**s
    vals = integ ** (1.0 / s)
    inner = speed <= 0.5 * grid.v_max
    C_b = float(vals.max())
    b_bound = {"s": s, "C_b": C_b, "sup_inner": float(vals[inner].max()),
               "pass": bool(np.isfinite(C_b) and C_b > 0), "resolution": res}

    rng = np.random.default_rng(seed)
    K = grid.K
    if K * K <= max_pairs:
        i, j = np.divmod(np.arange(K * K), K)
    else:
        i = rng.integers(0, K, max_pairs)
        j = rng.integers(0, K, max_pairs)
    idx = np.stack(np.unravel_index(i, (n,) * D), axis=1)
    jdx = np.stack(np.unravel_index(j, (n,) * D), axis=1)
    off = tuple((jdx - idx + n - 1).T)
    bpair = bb[off]
    V2 = np.sum((grid.nodes[j] - grid.nodes[i]) ** 2, axis=1)
    both_inner = inner[i] & inner[j]
    sat = {"deltas": list(map(float, delta_list)), "C_delta": [], "sup_inner": [],
           "n_pairs": int(i.size), "resolution": res}
    ok = True
    for dlt in delta_list:
        ratio = bpair / (1 + dlt * bpair / (1 + V2)) / ((1 + a[i]) * (1 + a[j]))
        c_all, c_in = float(ratio.max()), float(ratio[both_inner].max())
        sat["C_delta"].append(c_all)
        sat["sup_inner"].append(c_in)
        ok &= bool(np.isfinite(c_all) and c_all <= 2.0 * c_in)
    sat["pass"] = ok

    norm, sv = gain_norm(tables)
    raw_norm, _ = gain_norm(tables, symmetric=False)
    gain = {"norm": norm, "singular_values": sv.tolist(), "raw_norm": raw_norm,
            "weight": "symmetrized loss frequency of the quadrature",
            "pass": bool(norm <= 1 + 1e-8), "resolution": res}

    return AuditReport(kernel=tables.spec.to_dict(), resolution=res, b_limit=b_limit,
                       a_lower=a_lower, b_bound=b_bound, saturation=sat, gain=gain,
                       truncation=f"assumptions checked on |v_i| <= {grid.v_max} only")


# --- BGK surrogate -----------------------------------------------------------

def discrete_maxwellian(G, grid: VelocityGrid, tol: float = 1e-14, max_iter: int = 50):
    """Relative-density Maxwellian ``exp(lambda . psi)`` with the moments of ``G``.

    ``psi = (1, v, |v|^2)``; the coefficients are found by Newton's method
    from the continuous Maxwellian with the same density, velocity and
    temperature.
    """
    G = np.asarray(G, dtype=float)
    single = G.ndim == 1
    G2 = np.atleast_2d(G)
    Z = grid.invariants()
    w = grid.weights
    m = (G2 * w) @ Z.T                                  # (N, D+2)
    rho = m[:, 0]
    if np.any(rho <= 0):
        raise ValueError("nonpositive density moment")
    u = m[:, 1:-1] / rho[:, None]
    T = (m[:, -1] / rho - np.sum(u**2, axis=1)) / grid.D
    if np.any(T <= 0):
        raise ValueError("nonpositive temperature moment")
    lam = np.empty_like(m)
    lam[:, 0] = np.log(rho) - 0.5 * grid.D * np.log(T) - 0.5 * np.sum(u**2, axis=1) / T
    lam[:, 1:-1] = u / T[:, None]
    lam[:, -1] = 0.5 - 0.5 / T
    scale = np.abs(m) + np.abs(rho)[:, None]
    # cells already at the grid equilibrium keep lambda = 0 exactly
    F0 = (np.ones_like(G2) * w) @ Z.T - m
    at_rest = np.all(F0 == 0.0, axis=1)
    lam[at_rest] = 0.0
    todo = ~at_rest
    for _ in range(max_iter):
        if not np.any(todo):
            break
        idx = np.nonzero(todo)[0]
        E = np.exp(lam[idx] @ Z)
        F = (E * w) @ Z.T - m[idx]
        done = np.all(np.abs(F) <= tol * scale[idx], axis=1)
        todo[idx[done]] = False
        step = ~done
        if not np.any(step):
            break
        J = np.einsum("ik,nk,jk->nij", Z, E[step] * w, Z)
        lam[idx[step]] -= np.linalg.solve(J, F[step][..., None])[..., 0]
    else:
        if np.any(todo):
            raise RuntimeError("discrete Maxwellian Newton iteration did not converge")
    Geq = np.exp(lam @ Z)
    return Geq[0] if single else Geq.reshape(G.shape)


def bgk_relax(G, grid: VelocityGrid):
    """``G_eq - G`` with ``G_eq`` the moment-matched relative Maxwellian."""
    G = np.asarray(G, dtype=float)
    return discrete_maxwellian(G, grid) - G


def bgk_step(G, grid: VelocityGrid, dt_over_eps: float):
    """Exact solution of ``G_t = (G_eq - G)/eps`` over one step."""
    Geq = discrete_maxwellian(G, grid)
    return Geq + (G - Geq) * math.exp(-dt_over_eps)


def bgk_dissipation(G, grid: VelocityGrid):
    """``<(G - G_eq) log(G / G_eq)>`` per cell."""
    G = np.asarray(G, dtype=float)
    Geq = discrete_maxwellian(G, grid)
    Gs = np.maximum(G, 1e-300)
    return ((Gs - Geq) * np.log(Gs / Geq)) @ grid.weights
