"""Monotone-constrained semiparametric fitters.

The free shrinkage vector b must be nondecreasing in the (effective)
variances: units with larger variance shrink at least as much, with exact
equality on variance ties.  The inner solver is weighted isotonic least
squares (pool-adjacent-violators); the box constraint is handled by clamping
the unconstrained isotonic solution, which is exact for separable quadratics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShrinkageError
from .estimators import GlsTarget, fit_ure
from .linalg import (
    DesignMatrix,
    ShrinkBasis,
    _as_vector,
    ols_location,
    projection_apply,
    rowspace_ls,
    shrink_basis,
    wls_location,
)
from .models import HeteroData, shrink_fraction
from .risk import (
    MembershipSpec,
    WeightedLossSpec,
    in_l,
    sp_model2_theta,
    ure_sp_model2,
    ure_weighted,
)

ALTERNATE_MAX_ITER = 500
ALTERNATE_TOL = 1e-12
QP_MAX_ITER = 100_000
QP_GRAD_TOL = 1e-10
# below this unit count, add one start per variance-order suffix (see
# _general_starts); the joint URE surface at tiny p has "peel the top
# variance block" basins that the central starts miss
SUFFIX_START_LIMIT = 30


@dataclass(frozen=True)
class MonotoneVector:
    """Shrinkage vector constrained to be nondecreasing in its order key."""

    b: np.ndarray
    order_key: np.ndarray

    def __post_init__(self):
        b = _as_vector(self.b, name="b")
        key = _as_vector(self.order_key, len(b), "order_key")
        if np.any(b < 0) or np.any(b > 1):
            raise ValueError("b must lie in [0, 1]")
        order = np.argsort(key, kind="stable")
        sorted_b = b[order]
        if np.any(np.diff(sorted_b) < 0):
            raise ValueError("b is not nondecreasing in the order key")
        sorted_key = key[order]
        ties = sorted_key[1:] == sorted_key[:-1]
        if np.any(sorted_b[1:][ties] != sorted_b[:-1][ties]):
            raise ValueError("b differs across order-key ties")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "order_key", key)


@dataclass
class SemiparamFit:
    """Result of a monotone URE minimization."""

    model: int
    b: MonotoneVector
    mu: np.ndarray
    theta_hat: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    beta: np.ndarray | None = None
    beta0: np.ndarray | None = None
    in_l: bool | None = None
    trace: list[float] = field(default_factory=list)


def pava_weighted(targets, weights, order_key) -> np.ndarray:
    """Weighted isotonic least squares along an ordering key.

    Returns argmin of sum_i weights_i (x_i - targets_i)^2 over x nondecreasing
    in order_key, where equal keys are constrained to share one value.  Zero
    weights are allowed (at least one weight must be positive): entries inside
    a positive-weight block take the block value; all-zero-weight blocks take
    the next block's value, or the preceding value at the top end.
    """
    t = _as_vector(targets, name="targets")
    w = _as_vector(weights, len(t), "weights")
    key = _as_vector(order_key, len(t), "order_key")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be nonnegative and finite")
    if not np.any(w > 0):
        raise ShrinkageError("isotonic fit needs at least one positive weight")
    if not np.all(np.isfinite(t[w > 0])):
        raise ValueError("targets with positive weight must be finite")
    n = len(t)

    order = np.argsort(key, kind="stable")
    t_s, w_s, key_s = t[order], w[order], key[order]

    # merge order-key ties into blocks (ties force equal fitted values)
    bounds = [0]
    for i in range(1, n):
        if key_s[i] != key_s[i - 1]:
            bounds.append(i)
    bounds.append(n)
    n_blocks = len(bounds) - 1
    blk_w = np.empty(n_blocks)
    blk_wt = np.empty(n_blocks)
    for j in range(n_blocks):
        lo, hi = bounds[j], bounds[j + 1]
        blk_w[j] = w_s[lo:hi].sum()
        blk_wt[j] = (w_s[lo:hi] * t_s[lo:hi]).sum()

    # pool adjacent violators over the positive-weight blocks
    stack: list[list] = []  # [weight, weighted_target, block_ids]
    for j in range(n_blocks):
        if blk_w[j] <= 0:
            continue
        cur = [blk_w[j], blk_wt[j], [j]]
        while stack and stack[-1][1] * cur[0] > cur[1] * stack[-1][0]:
            prev = stack.pop()
            cur = [prev[0] + cur[0], prev[1] + cur[1], prev[2] + cur[2]]
        stack.append(cur)

    fitted = np.full(n_blocks, np.nan)
    for wsum, wtsum, ids in stack:
        fitted[ids] = wtsum / wsum
    # all-zero blocks inherit from the right, then from the left at the top end
    nxt = np.nan
    for j in range(n_blocks - 1, -1, -1):
        if np.isnan(fitted[j]):
            fitted[j] = nxt
        else:
            nxt = fitted[j]
    prv = np.nan
    for j in range(n_blocks):
        if np.isnan(fitted[j]):
            fitted[j] = prv
        else:
            prv = fitted[j]

    out_sorted = np.empty(n)
    for j in range(n_blocks):
        out_sorted[bounds[j] : bounds[j + 1]] = fitted[j]
    out = np.empty(n)
    out[order] = out_sorted
    return out


def _b_step(y: np.ndarray, a: np.ndarray, mu: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Monotone minimizer of the URE over b given the location mu."""
    resid2 = (y - mu) ** 2
    weights = psi * resid2
    targets = np.divide(a, resid2, out=np.zeros_like(a), where=resid2 > 0)
    b = np.clip(pava_weighted(targets, weights, a), 0.0, 1.0)
    # zero-residual units are free in the quadratic but their -2*b*A URE term
    # still rewards shrinkage, so trailing zero-weight variance blocks take
    # the largest feasible value
    if np.any(weights == 0):
        order = np.argsort(a, kind="stable")
        a_s = a[order]
        weights_s = weights[order]
        i = len(a_s)
        while i > 0:
            j = i - 1
            while j > 0 and a_s[j - 1] == a_s[i - 1]:
                j -= 1
            if weights_s[j:i].sum() > 0:
                break
            b[order[j:i]] = 1.0
            i = j
    return b


def _mu_step(
    x: DesignMatrix, y: np.ndarray, b: np.ndarray, psi: np.ndarray,
    beta_prev: np.ndarray, mu_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Location update: weighted fit with weights psi * b^2 (zero-weight rows
    drop out of the normal equations).  Keeps the previous location when b is
    identically zero, where the objective does not depend on mu."""
    wts = psi * b * b
    if not np.any(wts > 0):
        return beta_prev, mu_prev
    c = np.sqrt(wts)
    return rowspace_ls(x, c, c * y)


def _alternate_spec(
    data: HeteroData, spec: WeightedLossSpec,
    starts: list[tuple[np.ndarray, np.ndarray]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, int, bool, list[float]]:
    """Alternating minimization of the (psi-weighted) URE from several
    location starts; returns the best run."""
    y, a, x = data.y, data.a, data.x
    psi = spec.psi
    best = None
    for beta0, mu0 in starts:
        beta, mu = beta0, mu0
        trace: list[float] = []
        prev_obj = math.inf
        converged = False
        iterations = 0
        b = np.zeros(data.p)
        for iterations in range(1, ALTERNATE_MAX_ITER + 1):
            b = _b_step(y, a, mu, psi)
            beta, mu = _mu_step(x, y, b, psi, beta, mu)
            obj = ure_weighted(data, spec, b, mu)
            if not math.isfinite(obj):
                raise ShrinkageError("semiparametric URE became non-finite")
            trace.append(obj)
            if prev_obj - obj < ALTERNATE_TOL:
                converged = True
                break
            prev_obj = obj
        candidate = (trace[-1], b, beta, mu, iterations, converged, trace)
        if best is None or candidate[0] < best[0]:
            best = candidate
    obj, b, beta, mu, iterations, converged, trace = best
    return b, beta, mu, obj, iterations, converged, trace


def _general_starts(data: HeteroData) -> list[tuple[np.ndarray, np.ndarray]]:
    """Alternation starts for the joint (b, location) minimization.

    Always: the WLS and OLS locations plus the parametric URE minimizer
    (starting there makes the fitted objective dominate the parametric one by
    monotonicity).  At small p, also one start per suffix of the variance
    order: the monotone constraint only allows fully-shrunk units to form a
    top-variance suffix, and the minimizer frequently parks the location at
    such a suffix's own fit, a basin the central starts never reach.
    """
    beta_wls, mu_wls = wls_location(data.x, data.y, data.a)
    beta_ols, mu_ols = ols_location(data.x, data.y)
    starts = [(beta_wls, mu_wls), (beta_ols, mu_ols)]
    par = fit_ure(data, model=1)
    starts.append((par.beta, par.mu))
    if data.p <= SUFFIX_START_LIMIT:
        ones = np.ones(data.p)
        order = np.argsort(data.a, kind="stable")
        for s in range(1, data.p):
            b0 = np.zeros(data.p)
            b0[order[data.p - s :]] = 1.0
            starts.append(_mu_step(data.x, data.y, b0, ones, beta_ols, mu_ols))
    return starts


def fit_ure_sp_model1(
    data: HeteroData, target: GlsTarget | None = None,
    membership: MembershipSpec = MembershipSpec(),
) -> SemiparamFit:
    """Semiparametric URE fit that shrinks observations toward a location.

    With target=None the location is fitted jointly with b by alternation;
    with a GLS target the location is pinned at P_{M,X} Y and a single
    monotone b-step solves the problem exactly.
    """
    spec = WeightedLossSpec(np.ones(data.p))
    if target is None:
        b, beta, mu, obj, iterations, converged, trace = _alternate_spec(
            data, spec, _general_starts(data)
        )
    else:
        mu = projection_apply(data.x, target.resolve(data.a), data.y)
        beta = np.linalg.lstsq(data.x.entries.T, mu, rcond=None)[0]
        b = _b_step(data.y, data.a, mu, spec.psi)
        obj = ure_weighted(data, spec, b, mu)
        iterations, converged, trace = 1, True, [obj]
    theta = (1.0 - b) * data.y + b * mu
    return SemiparamFit(
        model=1,
        b=MonotoneVector(b, data.a),
        mu=mu,
        beta=beta,
        theta_hat=theta,
        objective_value=obj,
        iterations=iterations,
        converged=converged,
        in_l=in_l(mu, data.x, data.y, membership),
        trace=trace,
    )


def fit_ure_sp_weighted(
    data: HeteroData, spec: WeightedLossSpec,
    membership: MembershipSpec = MembershipSpec(),
) -> SemiparamFit:
    """Semiparametric URE fit under psi-weighted squared error loss.

    The monotone class is unchanged: the parametric shrinkage fractions are
    invariant under (A_i, lam) -> (psi_i A_i, psi_i lam), so b still orders
    by the raw variances.
    """
    b, beta, mu, obj, iterations, converged, trace = _alternate_spec(
        data, spec, _general_starts(data)
    )
    theta = (1.0 - b) * data.y + b * mu
    return SemiparamFit(
        model=1,
        b=MonotoneVector(b, data.a),
        mu=mu,
        beta=beta,
        theta_hat=theta,
        objective_value=obj,
        iterations=iterations,
        converged=converged,
        in_l=in_l(mu, data.x, data.y, membership),
        trace=trace,
    )


def _project_monotone_box(v: np.ndarray, key: np.ndarray) -> np.ndarray:
    return np.clip(pava_weighted(v, np.ones_like(v), key), 0.0, 1.0)


def fit_ure_sp_model2(
    data: HeteroData, w, membership: MembershipSpec = MembershipSpec()
) -> SemiparamFit:
    """Semiparametric URE fit for coefficient shrinkage: monotone factors on
    the spectral coordinates, alternated with the k-dim location solve.

    The b-subproblem is a convex QP over the monotone box, solved by
    projected gradient with step 1/L and PAVA-plus-clamp projection; the
    alternation starts at the parametric URE minimizer so the fitted
    objective can only improve on it.
    """
    basis = shrink_basis(data.x, data.a, w)
    y, a, p = data.y, data.a, data.p
    h = basis.d * (basis.z @ (y / a))
    q_diag = basis.zzt_diag
    r0 = basis.z.T @ h - y  # residual of the full-shrinkage-to-data arm

    par = fit_ure(data, model=2, w=w)
    b = 1.0 - shrink_fraction(basis.d, par.lam)
    gamma = basis.to_spectral(par.beta)

    def b_step(gamma_cur: np.ndarray, b_cur: np.ndarray) -> np.ndarray:
        u = h - gamma_cur
        design = basis.z.T * u[None, :]  # (p, k)
        hess = (2.0 / p) * (design.T @ design)
        lin = -(2.0 / p) * (design.T @ r0 + basis.d * q_diag)
        lip = float(np.linalg.eigvalsh(hess)[-1]) if basis.k > 0 else 0.0
        if lip <= 1e-300:
            # objective is linear with nonpositive slope in every coordinate
            return np.ones(basis.k)
        bb = b_cur.copy()
        for _ in range(QP_MAX_ITER):
            grad = hess @ bb + lin
            bb_next = _project_monotone_box(bb - grad / lip, basis.d)
            if lip * float(np.linalg.norm(bb - bb_next)) < QP_GRAD_TOL:
                bb = bb_next
                break
            bb = bb_next
        return bb

    def gamma_step(b_cur: np.ndarray, gamma_cur: np.ndarray) -> np.ndarray:
        if not np.any(b_cur > 0):
            return gamma_cur
        design = basis.z.T * b_cur[None, :]
        target = y - basis.z.T @ ((1.0 - b_cur) * h)
        return np.linalg.lstsq(design, target, rcond=None)[0]

    trace: list[float] = []
    prev_obj = ure_sp_model2(data, basis, b, basis.from_spectral(gamma))
    converged = False
    iterations = 0
    for iterations in range(1, ALTERNATE_MAX_ITER + 1):
        b = b_step(gamma, b)
        gamma = gamma_step(b, gamma)
        obj = ure_sp_model2(data, basis, b, basis.from_spectral(gamma))
        if not math.isfinite(obj):
            raise ShrinkageError("semiparametric URE became non-finite")
        trace.append(obj)
        if prev_obj - obj < ALTERNATE_TOL:
            converged = True
            break
        prev_obj = obj

    beta0 = basis.from_spectral(gamma)
    mu = basis.mu_from_spectral(gamma)
    theta = sp_model2_theta(data, basis, b, gamma)
    return SemiparamFit(
        model=2,
        b=MonotoneVector(b, basis.d),
        mu=mu,
        beta0=beta0,
        theta_hat=theta,
        objective_value=trace[-1],
        iterations=iterations,
        converged=converged,
        in_l=in_l(mu, data.x, data.y, membership),
        trace=trace,
    )
