"""Parametric fitters for the two shrinkage families.

Every fitter profiles the shrink location out of its criterion (the inner
minimizer is a weighted least-squares fit in the row space of the covariates)
and then runs the shared grid-plus-golden-section search over the prior scale
lam in [0, +inf].  The reported objective is recomputed through the public
risk/URE formulas at the fitted hyperparameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ShrinkageError
from .linalg import (
    DesignMatrix,
    ShrinkBasis,
    ols_location,
    projection_apply,
    projection_diag,
    rowspace_ls,
    shrink_basis,
    wls_location,
)
from .models import GenericPrior, HeteroData, GroundTruth, generic_shrinkage, shrink_fraction
from .optimize import minimize_lambda_profile
from .risk import MembershipSpec, exact_risk, in_l, loss, sp_model2_theta, ure, ure_gls

EBMOM_MAX_ITER = 200
EBMOM_TOL = 1e-10


@dataclass(frozen=True)
class GlsTarget:
    """Prespecified shrink location P_{M,X} Y.

    kind "ols" is M = I, "wls" is M = A^{-1}; "custom" carries an explicit
    SPD matrix (or positive diagonal vector) in m.
    """

    kind: str = "wls"
    m: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("ols", "wls", "custom"):
            raise ValueError(f"unknown GLS target kind {self.kind!r}")
        if self.kind == "custom" and self.m is None:
            raise ValueError("custom GLS target needs an explicit M")

    def resolve(self, a: np.ndarray) -> np.ndarray:
        if self.kind == "ols":
            return np.ones_like(a)
        if self.kind == "wls":
            return 1.0 / a
        return np.asarray(self.m, dtype=float)


@dataclass
class ParametricFit:
    """Fitted hyperparameters and the resulting estimate.

    lam is None for the James-Stein fit, which is not in the lam family; its
    single uniform shrinkage coefficient sits in js_factor.  beta holds the
    shrink-location coefficients (the prior coefficient for the coefficient-
    shrinkage model).  objective_value is the method's own criterion at the
    fit (NaN for moment and James-Stein fits, which have none).
    """

    method: str
    model: int
    lam: float | None
    beta: np.ndarray | None
    mu: np.ndarray | None
    theta_hat: np.ndarray
    objective_value: float
    in_l: bool | None
    js_factor: float | None = None
    iterations: int | None = None


def _require_model(model: int, w) -> None:
    if model not in (1, 2):
        raise ValueError(f"model must be 1 or 2, got {model!r}")
    if model == 2 and w is None:
        raise ValueError("the coefficient-shrinkage model needs the prior scale W")


def _finish_model1(
    data: HeteroData, method: str, lam: float, beta: np.ndarray, mu: np.ndarray,
    objective: float, membership: MembershipSpec,
) -> ParametricFit:
    frac = shrink_fraction(data.a, lam)
    theta = frac * data.y + (1.0 - frac) * mu
    return ParametricFit(
        method=method, model=1, lam=lam, beta=beta, mu=mu, theta_hat=theta,
        objective_value=objective, in_l=in_l(mu, data.x, data.y, membership),
    )


def _finish_model2(
    data: HeteroData, method: str, lam: float, basis: ShrinkBasis, gamma0: np.ndarray,
    objective: float, membership: MembershipSpec,
) -> ParametricFit:
    beta0 = basis.from_spectral(gamma0)
    mu = basis.mu_from_spectral(gamma0)
    b = 1.0 - shrink_fraction(basis.d, lam)
    theta = sp_model2_theta(data, basis, b, gamma0)
    return ParametricFit(
        method=method, model=2, lam=lam, beta=beta0, mu=mu, theta_hat=theta,
        objective_value=objective, in_l=in_l(mu, data.x, data.y, membership),
    )


# ---------------------------------------------------------------------------
# URE with jointly fitted location


def fit_ure(
    data: HeteroData, model: int = 1, w=None,
    membership: MembershipSpec = MembershipSpec(),
) -> ParametricFit:
    """Minimize the URE jointly over the prior scale and the shrink location.

    For each lam the inner location minimizer is the weighted least squares
    fit with weights (A_i/(A_i+lam))^2 (observation shrinkage) or the k-dim
    least squares in the spectral coordinates (coefficient shrinkage); the
    outer problem runs on the shared grid-plus-refine search.
    """
    _require_model(model, w)
    x, y, a = data.x, data.y, data.a
    sum_a = float(np.sum(a))

    if model == 1:

        def inner(lam: float):
            if math.isinf(lam):
                beta, mu = ols_location(x, y)  # weight-zero location, reported only
                return sum_a / data.p, beta, mu
            c = 1.0 - shrink_fraction(a, lam)
            beta, mu = rowspace_ls(x, c, c * y)
            comp = c * (y - mu)
            tr_sa = float(np.sum((1.0 - c) * a))
            return (float(comp @ comp) + 2.0 * tr_sa - sum_a) / data.p, beta, mu

        lam_hat, _ = minimize_lambda_profile(lambda lam: inner(lam)[0], a)
        _, beta, mu = inner(lam_hat)
        objective = ure(data, GenericPrior.model1(lam_hat, mu))
        return _finish_model1(data, "ure", lam_hat, beta, mu, objective, membership)

    basis = shrink_basis(x, a, w)
    q = basis.zzt_diag
    zy = basis.z @ (y / a)
    beta_wls, _ = wls_location(x, y, a)
    gamma_wls = basis.to_spectral(beta_wls)

    def inner2(lam: float):
        phi = shrink_fraction(basis.d, lam)
        s_y = basis.z.T @ (phi * basis.d * zy)
        r = y - s_y
        bfac = 1.0 - phi
        if np.all(bfac == 0.0):
            gamma = gamma_wls  # location carries no weight at lam = +inf
            comp = r
        else:
            design = basis.z.T * bfac[None, :]
            gamma = np.linalg.lstsq(design, r, rcond=None)[0]
            comp = r - design @ gamma
        tr_sa = float(np.sum(phi * basis.d * q))
        return (float(comp @ comp) + 2.0 * tr_sa - sum_a) / data.p, gamma

    lam_hat, _ = minimize_lambda_profile(lambda lam: inner2(lam)[0], basis.d)
    _, gamma = inner2(lam_hat)
    objective = ure(data, GenericPrior.model2(lam_hat, basis, basis.from_spectral(gamma)))
    return _finish_model2(data, "ure", lam_hat, basis, gamma, objective, membership)


# ---------------------------------------------------------------------------
# URE with a prespecified GLS location


def fit_ure_gls(
    data: HeteroData, model: int = 1, target: GlsTarget = GlsTarget("wls"), w=None,
    membership: MembershipSpec = MembershipSpec(),
) -> ParametricFit:
    """Minimize the GLS-location URE over the prior scale only, with the
    location pinned at P_{M,X} Y."""
    _require_model(model, w)
    x, y, a = data.x, data.y, data.a
    m = target.resolve(a)
    mu_hat = projection_apply(x, m, y)
    diag_p = projection_diag(x, m)
    resid = y - mu_hat
    sum_a = float(np.sum(a))
    tr_ip_a = float(np.sum((1.0 - diag_p) * a))
    method = f"ure-{target.kind}" if target.kind != "custom" else "ure-gls"

    if model == 1:

        def objective1(lam: float) -> float:
            c = 1.0 - shrink_fraction(a, lam)
            comp = c * resid
            tr_s_ip_a = float(np.sum((1.0 - c) * (1.0 - diag_p) * a))
            return (float(comp @ comp) + sum_a - 2.0 * (tr_ip_a - tr_s_ip_a)) / data.p

        lam_hat, _ = minimize_lambda_profile(objective1, a)
        prior = GenericPrior.model1(lam_hat, mu_hat)
        objective = ure_gls(data, prior, m)
        beta_loc = np.linalg.lstsq(x.entries.T, mu_hat, rcond=None)[0]
        return _finish_model1(data, method, lam_hat, beta_loc, mu_hat, objective, membership)

    basis = shrink_basis(x, a, w)
    rz = basis.z @ (resid / a)
    az = basis.z.T * a[:, None]
    from .risk import _projection_times

    t_diag = np.einsum("ij,ji->i", basis.z / a, az - _projection_times(x, m, az))

    def objective2(lam: float) -> float:
        phi = shrink_fraction(basis.d, lam)
        coef = phi * basis.d
        comp = resid - basis.z.T @ (coef * rz)
        tr_s_ip_a = float(np.sum(coef * t_diag))
        return (float(comp @ comp) + sum_a - 2.0 * (tr_ip_a - tr_s_ip_a)) / data.p

    lam_hat, _ = minimize_lambda_profile(objective2, basis.d)
    # the fitted location lies in the row space, so it has exact spectral coordinates
    gamma = np.linalg.lstsq(basis.z.T, mu_hat, rcond=None)[0]
    prior = GenericPrior.model2(lam_hat, basis, basis.from_spectral(gamma))
    objective = ure_gls(data, prior, m)
    return _finish_model2(data, method, lam_hat, basis, gamma, objective, membership)


# ---------------------------------------------------------------------------
# Empirical Bayes


def fit_ebmle(
    data: HeteroData, model: int = 1, w=None,
    membership: MembershipSpec = MembershipSpec(),
) -> ParametricFit:
    """Maximize the marginal likelihood of Y over the prior scale and location.

    For fixed lam the location maximizer is the GLS fit under the marginal
    covariance A + lam*C; the lam profile is minimized as the negative
    log-likelihood (quadratic form plus log determinant).
    """
    _require_model(model, w)
    x, y, a = data.x, data.y, data.a

    if model == 1:

        def inner(lam: float):
            if math.isinf(lam):
                return math.inf, None, None
            weights = 1.0 / (a + lam)
            c = np.sqrt(weights)
            beta, mu = rowspace_ls(x, c, c * y)
            r = y - mu
            val = float(np.sum(r * r * weights)) + float(np.sum(np.log(a + lam)))
            return val, beta, mu

        lam_hat, neg_ll = minimize_lambda_profile(lambda lam: inner(lam)[0], a)
        _, beta, mu = inner(lam_hat)
        return _finish_model1(data, "ebmle", lam_hat, beta, mu, -neg_ll, membership)

    basis = shrink_basis(x, a, w)
    beta_wls, mu_wls = wls_location(x, y, a)
    # GLS under A + lam X^T W X coincides with WLS for every lam: the extra
    # covariance lies along the design space, so the location profile is flat.
    rw = y - mu_wls
    zr = basis.z @ (rw / a)
    logdet_a = float(np.sum(np.log(a)))

    def objective(lam: float) -> float:
        if math.isinf(lam):
            return math.inf
        phi = shrink_fraction(basis.d, lam)
        s_r = basis.z.T @ (phi * basis.d * zr)
        quad = float(rw @ ((rw - s_r) / a))
        return quad + logdet_a + float(np.sum(np.log1p(lam / basis.d)))

    lam_hat, neg_ll = minimize_lambda_profile(objective, basis.d)
    gamma = basis.to_spectral(beta_wls)
    return _finish_model2(data, "ebmle", lam_hat, basis, gamma, -neg_ll, membership)


def fit_ebmom(
    data: HeteroData, model: int = 1, w=None,
    membership: MembershipSpec = MembershipSpec(),
) -> ParametricFit:
    """Method-of-moments fit: alternate the GLS location under A + lam*C with
    the degrees-of-freedom-adjusted positive-part moment equation for lam.

    Raises ConvergenceError (carrying the last iterate) if the fixed point
    has not stabilized after 200 iterations.
    """
    _require_model(model, w)
    x, y, a = data.x, data.y, data.a
    p, k = data.p, data.k
    if p <= k:
        raise ShrinkageError("moment fit needs p > k")
    sum_a = float(np.sum(a))

    basis = None
    if model == 1:
        tr_c = float(p)
    else:
        basis = shrink_basis(x, a, w)
        tr_c = float(np.sum(w * (x.entries @ x.entries.T)))
        beta_wls, mu_wls = wls_location(x, y, a)

    def lam_update(mu: np.ndarray) -> float:
        r = y - mu
        return max(0.0, (p / (p - k)) * float(r @ r) / tr_c - sum_a / tr_c)

    beta, mu = ols_location(x, y)
    lam = lam_update(mu)
    converged = False
    iterations = 0
    for iterations in range(1, EBMOM_MAX_ITER + 1):
        if model == 1:
            c = 1.0 / np.sqrt(a + lam)
            beta, mu = rowspace_ls(x, c, c * y)
        else:
            beta, mu = beta_wls, mu_wls
        new_lam = lam_update(mu)
        done = abs(new_lam - lam) < EBMOM_TOL * (1.0 + lam)
        lam = new_lam
        if done:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"moment iteration did not stabilize in {EBMOM_MAX_ITER} iterations",
            lam=lam, mu=mu,
        )

    if model == 1:
        fit = _finish_model1(data, "ebmom", lam, beta, mu, math.nan, membership)
    else:
        fit = _finish_model2(data, "ebmom", lam, basis, basis.to_spectral(beta), math.nan, membership)
    fit.iterations = iterations
    return fit


# ---------------------------------------------------------------------------
# Positive-part James-Stein


def fit_james_stein(
    data: HeteroData, membership: MembershipSpec = MembershipSpec()
) -> ParametricFit:
    """Positive-part James-Stein shrinkage of Y toward the WLS fit, with one
    uniform coefficient on the deviations.  Needs p > k + 2."""
    p, k = data.p, data.k
    if p <= k + 2:
        raise ShrinkageError(f"James-Stein requires p > k+2 (p={p}, k={k})")
    beta, mu = wls_location(data.x, data.y, data.a)
    dev = data.y - mu
    ssq = float(np.sum(dev * dev / data.a))
    factor = max(0.0, 1.0 - (p - k - 2) / max(ssq, 1e-300))
    theta = mu + factor * dev
    return ParametricFit(
        method="js", model=1, lam=None, beta=beta, mu=mu, theta_hat=theta,
        objective_value=math.nan,
        in_l=in_l(mu, data.x, data.y, membership),
        js_factor=factor,
    )


# ---------------------------------------------------------------------------
# Oracles (need the true means; reference lower bounds only)


def fit_oracle(
    data: HeteroData, truth: GroundTruth, kind: str = "OL",
    model: int = 1, w=None, membership: MembershipSpec = MembershipSpec(),
) -> ParametricFit:
    """Oracle references: kind "OL" minimizes the realized loss of the
    shrinkage rule, kind "OR" its exact risk, both over (lam, location)."""
    _require_model(model, w)
    if kind not in ("OL", "OR"):
        raise ValueError(f"oracle kind must be 'OL' or 'OR', got {kind!r}")
    x, y, a = data.x, data.y, data.a
    theta = truth.theta
    if len(theta) != data.p:
        raise ValueError("truth has wrong length")

    if model == 1:

        def inner(lam: float):
            s = shrink_fraction(a, lam)
            c = 1.0 - s
            if math.isinf(lam):
                beta, mu = ols_location(x, y)
                if kind == "OL":
                    return loss(theta, y), beta, mu
                return float(np.sum(a)) / data.p, beta, mu
            if kind == "OL":
                beta, mu = rowspace_ls(x, c, theta - s * y)
                val = loss(theta, s * y + c * mu)
            else:
                beta, mu = rowspace_ls(x, c, c * theta)
                bias = c * (mu - theta)
                val = (float(bias @ bias) + float(np.sum(s * s * a))) / data.p
            return val, beta, mu

        lam_hat, _ = minimize_lambda_profile(lambda lam: inner(lam)[0], a)
        _, beta, mu = inner(lam_hat)
        prior = GenericPrior.model1(lam_hat, mu)
        objective = loss(theta, generic_shrinkage(data, prior)) if kind == "OL" else exact_risk(theta, a, prior)
        return _finish_model1(data, f"oracle-{kind.lower()}", lam_hat, beta, mu, objective, membership)

    basis = shrink_basis(x, a, w)
    q = basis.zzt_diag
    zy = basis.z @ (y / a)
    zt = basis.z @ (theta / a)

    def inner2(lam: float):
        phi = shrink_fraction(basis.d, lam)
        bfac = 1.0 - phi
        design = basis.z.T * bfac[None, :]
        if kind == "OL":
            target = theta - basis.z.T @ (phi * basis.d * zy)
        else:
            target = theta - basis.z.T @ (phi * basis.d * zt)
        if np.all(bfac == 0.0):
            gamma = basis.to_spectral(wls_location(x, y, a)[0])
            resid = target
        else:
            gamma = np.linalg.lstsq(design, target, rcond=None)[0]
            resid = target - design @ gamma
        val = float(resid @ resid) / data.p
        if kind == "OR":
            val += float(np.sum(phi * phi * basis.d * q)) / data.p
        return val, gamma

    lam_hat, _ = minimize_lambda_profile(lambda lam: inner2(lam)[0], basis.d)
    _, gamma = inner2(lam_hat)
    prior = GenericPrior.model2(lam_hat, basis, basis.from_spectral(gamma))
    objective = loss(theta, generic_shrinkage(data, prior)) if kind == "OL" else exact_risk(theta, a, prior)
    return _finish_model2(data, f"oracle-{kind.lower()}", lam_hat, basis, gamma, objective, membership)
