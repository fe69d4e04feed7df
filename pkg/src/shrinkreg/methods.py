"""Uniform dispatch from method identifiers to fitted estimates.

The simulation runner, the prediction pipeline, and the CLI all resolve
estimators through this registry so they agree on names and on the reported
per-unit shrinkage factor (the weight kept on the raw observation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShrinkageError
from .estimators import (
    GlsTarget,
    fit_ebmle,
    fit_ebmom,
    fit_james_stein,
    fit_oracle,
    fit_ure,
    fit_ure_gls,
)
from .linalg import ols_location, shrink_basis, wls_location
from .models import GroundTruth, HeteroData, shrink_fraction
from .risk import MembershipSpec
from .semiparam import fit_ure_sp_model1, fit_ure_sp_model2

METHODS = (
    "naive",
    "ols",
    "wls",
    "ebmle",
    "ebmom",
    "js",
    "ure",
    "ure-ols",
    "ure-wls",
    "ure-sp",
    "ure-sp-ols",
    "ure-sp-wls",
    "or",
    "ol",
)

_ORACLES = {"or", "ol"}


@dataclass
class MethodResult:
    method: str
    theta_hat: np.ndarray
    factor: np.ndarray | None  # per-unit weight on the raw observation
    lam: float | None = None
    b: np.ndarray | None = None
    js_factor: float | None = None
    objective: float = math.nan
    in_l: bool | None = None
    coef_factors: np.ndarray | None = None  # spectral-coordinate factors, model 2


def apply_method(
    method: str,
    data: HeteroData,
    *,
    truth: GroundTruth | None = None,
    model: int = 1,
    w=None,
    membership: MembershipSpec = MembershipSpec(),
) -> MethodResult:
    """Fit one named estimator and return its estimate plus fitted factors.

    Oracle methods ("or", "ol") need the truth vector.  model=2 routes the
    ure/ebmle/ebmom families through coefficient shrinkage with scale W
    (identity when not given); the remaining methods are model-agnostic or
    defined on observations only.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    if method in _ORACLES and truth is None:
        raise ValueError(f"method {method!r} needs the true means")
    if model == 2 and w is None:
        w = np.eye(data.k)

    p = data.p
    if method == "naive":
        return MethodResult(method, data.y.copy(), np.ones(p))
    if method == "ols":
        _, mu = ols_location(data.x, data.y)
        return MethodResult(method, mu, np.zeros(p))
    if method == "wls":
        _, mu = wls_location(data.x, data.y, data.a)
        return MethodResult(method, mu, np.zeros(p))
    if method == "js":
        fit = fit_james_stein(data, membership)
        return MethodResult(
            method, fit.theta_hat, np.full(p, fit.js_factor),
            js_factor=fit.js_factor, objective=fit.objective_value, in_l=fit.in_l,
        )
    if method in ("ure-sp", "ure-sp-ols", "ure-sp-wls"):
        target = None
        if method == "ure-sp-ols":
            target = GlsTarget("ols")
        elif method == "ure-sp-wls":
            target = GlsTarget("wls")
        if model == 2 and target is not None:
            raise ValueError("coefficient-shrinkage semiparametric fits have no GLS-target variant")
        if model == 2:
            fit2 = fit_ure_sp_model2(data, w, membership)
            return MethodResult(
                method, fit2.theta_hat, None, b=fit2.b.b,
                objective=fit2.objective_value, in_l=fit2.in_l,
                coef_factors=1.0 - fit2.b.b,
            )
        fit1 = fit_ure_sp_model1(data, target, membership)
        return MethodResult(
            method, fit1.theta_hat, 1.0 - fit1.b.b, b=fit1.b.b,
            objective=fit1.objective_value, in_l=fit1.in_l,
        )

    if method == "ure":
        fit = fit_ure(data, model=model, w=w, membership=membership)
    elif method == "ure-ols":
        fit = fit_ure_gls(data, model=model, target=GlsTarget("ols"), w=w, membership=membership)
    elif method == "ure-wls":
        fit = fit_ure_gls(data, model=model, target=GlsTarget("wls"), w=w, membership=membership)
    elif method == "ebmle":
        fit = fit_ebmle(data, model=model, w=w, membership=membership)
    elif method == "ebmom":
        fit = fit_ebmom(data, model=model, w=w, membership=membership)
    elif method == "or":
        fit = fit_oracle(data, truth, kind="OR", model=model, w=w, membership=membership)
    else:  # "ol"
        fit = fit_oracle(data, truth, kind="OL", model=model, w=w, membership=membership)

    if model == 1:
        factor = shrink_fraction(data.a, fit.lam)
        coef_factors = None
    else:
        factor = None
        basis = shrink_basis(data.x, data.a, w)
        coef_factors = shrink_fraction(basis.d, fit.lam)
    return MethodResult(
        method, fit.theta_hat, factor, lam=fit.lam,
        objective=fit.objective_value, in_l=fit.in_l, coef_factors=coef_factors,
    )
