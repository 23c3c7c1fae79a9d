"""Central finite differences as an independent check on ``backward``."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import PreconditionError
from .params import ParamSet


def finite_diff_check(
    f: Callable[[ParamSet], float],
    params: ParamSet,
    eps: float = 1e-5,
    grads: ParamSet | None = None,
    grad_fn: Callable[[ParamSet], ParamSet] | None = None,
    n_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float | None = None,
    kink_tol: float = 1e-3,
) -> float:
    """Worst relative error between analytic and numeric gradients.

    ``f`` maps parameters to a scalar loss. The analytic gradient is taken from
    ``grads`` or computed once with ``grad_fn``. ``n_coords`` random
    coordinates are probed (all of them when ``None``). A coordinate whose
    one-sided differences disagree by more than ``kink_tol`` (relative) sits on
    a relu kink and is left out of the comparison. ``floor`` bounds the
    denominator of the relative error from below; it defaults to
    ``1e-6 * max(1, |f|)``. A central difference carries absolute noise of a
    few ulps of ``f`` divided by ``eps``, so smaller components are compared
    against that floor rather than against themselves.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise PreconditionError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    if grads is None:
        if grad_fn is None:
            raise PreconditionError("pass either grads or grad_fn")
        grads = grad_fn(params)
    probe = params.copy()
    coords = [(name, idx) for name, arr in probe.items() for idx in np.ndindex(arr.shape)]
    if n_coords is not None and n_coords < len(coords):
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]

    f0 = float(f(probe))
    if floor is None:
        floor = 1e-6 * max(1.0, abs(f0))
    worst = 0.0
    for name, idx in coords:
        arr = probe[name]
        orig = arr[idx]
        arr[idx] = orig + eps
        fp = float(f(probe))
        arr[idx] = orig - eps
        fm = float(f(probe))
        arr[idx] = orig
        fwd = (fp - f0) / eps
        bwd = (f0 - fm) / eps
        if abs(fwd - bwd) > kink_tol * max(abs(fwd), abs(bwd), 1.0):
            continue
        numeric = (fp - fm) / (2 * eps)
        analytic = float(grads[name][idx])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, err)
    return worst
