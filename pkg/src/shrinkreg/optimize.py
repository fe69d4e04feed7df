"""One-dimensional hyperparameter search over [0, +inf].

Profile objectives here are continuous but not guaranteed unimodal, so the
minimizer is grid-then-refine: a fixed logarithmic grid (with the exact 0 and
+inf endpoints) followed by a golden-section pass inside the best bracketing
triple.  The best point ever evaluated is returned, which makes the result
at least as good as the grid by construction.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShrinkageError
from .linalg import geometric_mean

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

GRID_POINTS = 201
GRID_SPAN = 1e4
REL_TOL = 1e-10


class _Tracker:
    """Wraps an objective, validating values and remembering the best point."""

    def __init__(self, objective):
        self._objective = objective
        self.best_x = None
        self.best_val = math.inf

    def __call__(self, x: float) -> float:
        val = float(self._objective(x))
        if math.isnan(val) or val == -math.inf:
            raise ShrinkageError(f"profile objective is non-finite at lam={x!r}")
        if val < self.best_val or self.best_x is None:
            self.best_val = val
            self.best_x = x
        return val


def _golden(f, lo: float, hi: float, abs_tol: float, max_iter: int = 200) -> None:
    """Golden-section scan of f on [lo, hi]; results land in the tracker."""
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= abs_tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)


def minimize_lambda_profile(objective, scale_values) -> tuple[float, float]:
    """Minimize a profile objective over the prior scale lam in [0, +inf].

    scale_values sets the geometric center of the log grid (the sampling
    variances for observation shrinkage, the effective variances for
    coefficient shrinkage).  Returns (lam, value) at the best point evaluated.
    """
    f = _Tracker(objective)
    center = geometric_mean(scale_values)
    finite = np.geomspace(center / GRID_SPAN, center * GRID_SPAN, GRID_POINTS)
    lams = [0.0, *finite.tolist(), math.inf]
    vals = [f(lam) for lam in lams]
    i = int(np.argmin(vals))
    n = len(lams)
    if i == 0:
        hi = lams[1]
        _golden(f, 0.0, hi, REL_TOL * hi)
    elif i >= n - 2:
        # bracket reaches +inf; search in s = 1/lam with s = 0 the limit point
        hi_s = 1.0 / lams[n - 3]
        _golden(lambda s: f(math.inf if s == 0.0 else 1.0 / s), 0.0, hi_s, REL_TOL * hi_s)
    else:
        lo_u, hi_u = math.log(lams[i - 1]), math.log(lams[i + 1])
        _golden(lambda u: f(math.exp(u)), lo_u, hi_u, REL_TOL)
    return f.best_x, f.best_val
