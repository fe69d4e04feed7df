"""Loss, exact risk, and the unbiased risk estimates (URE).

Every URE here is an exactly unbiased estimate of the mean squared error risk
of the matching shrinkage rule, so values may be negative and are never
clamped.  The membership predicate and the finite-sample condition
diagnostics used to sanity-check the asymptotic regime live here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DesignMatrix,
    ShrinkBasis,
    _as_vector,
    projection_apply,
    projection_diag,
    shrink_basis,
)
from .models import (
    GenericPrior,
    HeteroData,
    _dense_shrink_matrix,
    apply_shrink,
    shrink_fraction,
    trace_shrink_a,
    trace_shrink_a_shrink,
)

ROWSPACE_RTOL = 1e-8


@dataclass(frozen=True)
class MembershipSpec:
    """Norm budget for allowable shrink locations: ||mu|| <= big_m * p^kappa * ||Y||."""

    big_m: float = 10.0
    kappa: float = 0.4

    def __post_init__(self):
        if self.big_m <= 0:
            raise ValueError("big_m must be positive")
        if not (0.0 <= self.kappa < 0.5):
            raise ValueError("kappa must lie in [0, 1/2)")


@dataclass(frozen=True)
class WeightedLossSpec:
    """Positive loss weights psi with sum(psi) = p."""

    psi: np.ndarray

    def __post_init__(self):
        psi = _as_vector(self.psi, name="psi")
        if np.any(psi <= 0) or not np.all(np.isfinite(psi)):
            raise ValueError("psi must be strictly positive and finite")
        p = len(psi)
        if abs(float(np.sum(psi)) - p) > 1e-8:
            raise ValueError(f"psi must sum to p={p}, got {np.sum(psi)!r}")
        object.__setattr__(self, "psi", psi)


@dataclass(frozen=True)
class ConditionDiagnostics:
    """Finite-p normalized moment and Gram quantities.

    The theta-dependent scalars are None when no truth vector is supplied.
    Whether the Gram matrices actually converge is a question about a sequence
    of datasets and is left to experiment-level trend checks.
    """

    cond_a: float
    cond_b: float | None
    cond_c: float | None
    cond_d: np.ndarray
    cond_e: np.ndarray
    cond_f: np.ndarray
    cond_g: np.ndarray
    d_k: float


def loss(theta, theta_hat) -> float:
    """Per-unit mean squared error (1/p) * ||theta - theta_hat||^2."""
    theta = _as_vector(theta, name="theta")
    theta_hat = _as_vector(theta_hat, len(theta), "theta_hat")
    diff = theta - theta_hat
    return float(diff @ diff) / len(theta)


def weighted_loss(theta, theta_hat, spec: WeightedLossSpec) -> float:
    """(1/p) * sum_i psi_i (theta_i - theta_hat_i)^2."""
    theta = _as_vector(theta, name="theta")
    theta_hat = _as_vector(theta_hat, len(theta), "theta_hat")
    diff = theta - theta_hat
    return float(np.sum(spec.psi * diff * diff)) / len(theta)


def exact_risk(theta, a, prior: GenericPrior) -> float:
    """Risk of the shrinkage rule with fixed (B, mu) at the true theta:
    (1/p) ||A(A+B)^{-1}(mu - theta)||^2 + (1/p) tr(B(A+B)^{-1}A(A+B)^{-1}B).
    """
    theta = _as_vector(theta, name="theta")
    a = _as_vector(a, len(theta), "a")
    diff = prior.mu - theta
    bias = diff - apply_shrink(prior, a, diff)
    p = len(theta)
    return (float(bias @ bias) + trace_shrink_a_shrink(prior, a)) / p


def ure(data: HeteroData, prior: GenericPrior) -> float:
    """Unbiased estimate of the risk of the (B, mu) shrinkage rule:
    (1/p) ||A(A+B)^{-1}(Y - mu)||^2 + (1/p) tr(A - 2 A(A+B)^{-1} A).
    """
    resid = data.y - prior.mu
    comp = resid - apply_shrink(prior, data.a, resid)
    trace_term = 2.0 * trace_shrink_a(prior, data.a) - float(np.sum(data.a))
    return (float(comp @ comp) + trace_term) / data.p


def ure_gls(data: HeteroData, prior: GenericPrior, m) -> float:
    """Unbiased risk estimate when shrinking toward the fitted location
    P_{M,X} Y; the cross term between the fit and the noise shows up as the
    extra projection inside the trace."""
    mu_hat = projection_apply(data.x, m, data.y)
    resid = data.y - mu_hat
    comp = resid - apply_shrink(prior, data.a, resid)

    diag_p = projection_diag(data.x, m)
    a = data.a
    # tr(A (A+B)^{-1} (I - P) A) with A (A+B)^{-1} = I - B (A+B)^{-1}
    tr_ip_a = float(np.sum((1.0 - diag_p) * a))
    if prior.b_dense is not None:
        s = _dense_shrink_matrix(a, prior.b_dense)
        pa = _projection_times(data.x, m, np.diag(a))
        tr_s_ip_a = float(np.trace(s @ (np.diag(a) - pa)))
    elif prior.basis is None:
        frac = shrink_fraction(a, prior.lam)
        tr_s_ip_a = float(np.sum(frac * (1.0 - diag_p) * a))
    else:
        basis = prior.basis
        az = basis.z.T * a[:, None]  # (p, k) = A Z^T
        paz = _projection_times(data.x, m, az)
        t = (basis.z / a) @ (az - paz)  # k x k: Z A^{-1} (I-P) A Z^T
        coef = shrink_fraction(basis.d, prior.lam) * basis.d
        tr_s_ip_a = float(np.sum(coef * np.diag(t)))
    trace_term = float(np.sum(a)) - 2.0 * (tr_ip_a - tr_s_ip_a)
    return (float(comp @ comp) + trace_term) / data.p


def _projection_times(x: DesignMatrix, m, cols: np.ndarray) -> np.ndarray:
    """P_{M,X} applied to each column of a (p, r) block."""
    m_arr = np.asarray(m, dtype=float)
    if m_arr.ndim == 1:
        xm = x.entries * m_arr
    else:
        xm = x.entries @ m_arr
    gram = xm @ x.entries.T
    gram = 0.5 * (gram + gram.T)
    return x.entries.T @ np.linalg.solve(gram, xm @ cols)


def _check_unit_interval(b: np.ndarray, name: str = "b") -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if np.any(b < 0) or np.any(b > 1) or not np.all(np.isfinite(b)):
        raise ValueError(f"{name} must lie in [0, 1]")
    return b


def ure_sp_model1(data: HeteroData, b, mu) -> float:
    """Unbiased risk estimate for the rule (1-b_i) Y_i + b_i mu_i with a
    free shrinkage vector b in [0, 1]^p."""
    b = _check_unit_interval(_as_vector(b, data.p, "b"))
    mu = _as_vector(mu, data.p, "mu")
    resid = b * (data.y - mu)
    return (float(resid @ resid) + float(np.sum((1.0 - 2.0 * b) * data.a))) / data.p


def ure_sp_model2(data: HeteroData, basis: ShrinkBasis, b, beta0) -> float:
    """Unbiased risk estimate for coefficient shrinkage with free factors b
    in [0, 1]^k on the spectral coordinates."""
    b = _check_unit_interval(_as_vector(b, basis.k, "b"))
    gamma0 = basis.to_spectral(beta0)
    theta_hat = sp_model2_theta(data, basis, b, gamma0)
    resid = theta_hat - data.y
    trace_term = 2.0 * float(np.sum((1.0 - b) * basis.d * basis.zzt_diag)) - float(
        np.sum(data.a)
    )
    return (float(resid @ resid) + trace_term) / data.p


def sp_model2_theta(
    data: HeteroData, basis: ShrinkBasis, b: np.ndarray, gamma0: np.ndarray
) -> np.ndarray:
    """Estimate Z^T ((I - diag(b)) Lambda Z A^{-1} Y + diag(b) gamma0)."""
    h = basis.d * (basis.z @ (data.y / data.a))
    return basis.z.T @ ((1.0 - b) * h + b * gamma0)


def ure_weighted(data: HeteroData, spec: WeightedLossSpec, b, mu) -> float:
    """Unbiased estimate of the psi-weighted risk:
    (1/p) sum_i psi_i (b_i^2 (Y_i - mu_i)^2 + (1 - 2 b_i) A_i).
    """
    b = _check_unit_interval(_as_vector(b, data.p, "b"))
    mu = _as_vector(mu, data.p, "mu")
    resid = data.y - mu
    per_unit = b * b * resid * resid + (1.0 - 2.0 * b) * data.a
    return float(np.sum(spec.psi * per_unit)) / data.p


def in_l(mu, x: DesignMatrix, y, spec: MembershipSpec = MembershipSpec()) -> bool:
    """True iff mu lies in the row space of x (relative residual below 1e-8)
    and ||mu|| <= big_m * p^kappa * ||Y||."""
    mu = _as_vector(mu, x.p, "mu")
    y = _as_vector(y, x.p, "y")
    norm_mu = float(np.linalg.norm(mu))
    if norm_mu > 0:
        resid = mu - projection_apply(x, np.ones(x.p), mu)
        if float(np.linalg.norm(resid)) > ROWSPACE_RTOL * norm_mu:
            return False
    bound = spec.big_m * x.p**spec.kappa * float(np.linalg.norm(y))
    return norm_mu <= bound


def condition_diagnostics(data: HeteroData, theta=None) -> ConditionDiagnostics:
    """Finite-p versions of the moment and Gram growth quantities.

    The largest effective variance d_k is computed from the spectral basis
    with unit prior scale (the data carries no W).
    """
    a = data.a
    x = data.x.entries
    p = data.p
    if theta is not None:
        theta = _as_vector(theta, p, "theta")
        cond_b = float(np.sum(a * theta * theta)) / p
        cond_c = float(theta @ theta) / p
    else:
        cond_b = None
        cond_c = None
    basis = shrink_basis(data.x, a, np.eye(data.k))
    return ConditionDiagnostics(
        cond_a=float(np.sum(a * a)) / p,
        cond_b=cond_b,
        cond_c=cond_c,
        cond_d=(x * a) @ x.T / p,
        cond_e=x @ x.T / p,
        cond_f=(x / a) @ x.T / p,
        cond_g=(x / (a * a)) @ x.T / p,
        d_k=float(basis.d[-1]),
    )
