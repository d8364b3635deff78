"""Select the compiled collision core, falling back to numpy."""
from __future__ import annotations

import os

from . import _collision_py

_compiled = None
if os.environ.get("ACOUSTIC_LIMIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _collision_core as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "numpy"


def _args(plan):
    return (plan.w, plan.active, plan.lo, plan.hi, plan.strides3, plan.koff,
            plan.base1, plan.na1, plan.st1, plan.fr1,
            plan.base2, plan.na2, plan.st2, plan.fr2, plan.coef)


def collide_raw(G, plan, backend=None):
    """Unprojected collision operator on a ``(K, N_x)`` field."""
    use = backend or BACKEND
    if use == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled collision core is not available")
        return _compiled.collide_raw(G, *_args(plan))
    return _collision_py.collide_raw(G, plan)


def dissipation_sum(G, plan, floor=1e-300, backend=None):
    use = backend or BACKEND
    if use == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled collision core is not available")
        return _compiled.dissipation_sum(G, *_args(plan), floor)
    return _collision_py.dissipation_sum(G, plan, floor)


def compiled_available() -> bool:
    return _compiled is not None
