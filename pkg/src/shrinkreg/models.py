"""Heteroscedastic two-level model types and their posterior-mean maps.

Estimators shrink the observation vector Y toward a location mu in the row
space of the covariates.  The two parametric families differ in the prior
covariance B: a full-rank multiple of the identity (shrinking observations),
or a rank-k multiple of X^T W X (shrinking regression coefficients).  An
infinite prior scale is a first-class value handled by its algebraic limit,
never by plugging a huge float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMatrixError
from .linalg import DesignMatrix, ShrinkBasis, _as_vector, shrink_basis, wls_location

# Beyond this unit count an explicit p x p prior covariance is refused;
# rank-k priors must route through the spectral basis instead.
DENSE_PRIOR_LIMIT = 64


@dataclass(frozen=True)
class HeteroData:
    """Observations with known unit-level variances and covariates."""

    y: np.ndarray
    a: np.ndarray
    x: DesignMatrix

    def __post_init__(self):
        y = _as_vector(self.y, name="y")
        a = _as_vector(self.a, len(y), "a")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise ValueError("variances a must be strictly positive and finite")
        if self.x.p != len(y):
            raise ValueError(f"covariate matrix has {self.x.p} units, y has {len(y)}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)

    @property
    def p(self) -> int:
        return len(self.y)

    @property
    def k(self) -> int:
        return self.x.k


@dataclass(frozen=True)
class GroundTruth:
    """True mean vector; only available in simulations."""

    theta: np.ndarray

    def __post_init__(self):
        theta = _as_vector(self.theta, name="theta")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta contains non-finite entries")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class ModelIParams:
    """Hyperparameters of the observation-shrinkage family: scale lam >= 0
    (possibly +inf) and a location mu = X^T beta kept in the row space by
    construction."""

    lam: float
    beta: np.ndarray
    mu: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (self.lam >= 0):
            raise ValueError("lam must be nonnegative (or +inf)")
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))

    @classmethod
    def from_beta(cls, lam: float, beta, x: DesignMatrix) -> "ModelIParams":
        beta = np.asarray(beta, dtype=float)
        return cls(lam=float(lam), beta=beta, mu=x.entries.T @ beta)


@dataclass(frozen=True)
class ModelIIParams:
    """Hyperparameters of the coefficient-shrinkage family: scale lam >= 0
    (possibly +inf), prior coefficient beta0, and the known k x k SPD scale W."""

    lam: float
    beta0: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if not (self.lam >= 0):
            raise ValueError("lam must be nonnegative (or +inf)")
        object.__setattr__(self, "beta0", np.asarray(self.beta0, dtype=float))
        w = np.asarray(self.w, dtype=float)
        if np.max(np.abs(w - w.T)) > 1e-10 * max(1.0, float(np.max(np.abs(w)))):
            raise ValueError("W must be symmetric")
        try:
            np.linalg.cholesky(w)
        except np.linalg.LinAlgError:
            raise ValueError("W must be positive definite") from None
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class GenericPrior:
    """Prior covariance B (scaled identity, scaled X^T W X, or explicit) plus
    a shrink location mu.

    Exactly one representation is populated: `lam` alone for B = lam * I,
    (`lam`, `basis`) for B = lam * X^T W X routed through the rank-k spectral
    basis, or `b_dense` for an explicit matrix.
    """

    mu: np.ndarray
    lam: float | None = None
    basis: ShrinkBasis | None = None
    b_dense: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu", _as_vector(self.mu, name="mu"))
        if self.b_dense is not None:
            b = np.asarray(self.b_dense, dtype=float)
            if b.shape != (len(self.mu), len(self.mu)):
                raise ValueError("dense B has wrong shape")
            if b.shape[0] > DENSE_PRIOR_LIMIT:
                raise ValueError(
                    f"dense priors are limited to p <= {DENSE_PRIOR_LIMIT}; "
                    "use the spectral-basis representation"
                )
            object.__setattr__(self, "b_dense", b)
        elif self.lam is None:
            raise ValueError("prior needs lam or an explicit B")
        elif not (self.lam >= 0):
            raise ValueError("lam must be nonnegative (or +inf)")

    @classmethod
    def model1(cls, lam: float, mu) -> "GenericPrior":
        return cls(mu=np.asarray(mu, dtype=float), lam=float(lam))

    @classmethod
    def model2(cls, lam: float, basis: ShrinkBasis, beta0) -> "GenericPrior":
        beta0 = np.asarray(beta0, dtype=float)
        mu = basis.mu_from_spectral(basis.to_spectral(beta0))
        return cls(mu=mu, lam=float(lam), basis=basis)

    @classmethod
    def dense(cls, b, mu) -> "GenericPrior":
        return cls(mu=np.asarray(mu, dtype=float), b_dense=np.asarray(b, dtype=float))


def shrink_fraction(scale, lam: float) -> np.ndarray:
    """Componentwise lam / (lam + scale) with exact 0 and +inf limits."""
    scale = np.asarray(scale, dtype=float)
    if math.isinf(lam):
        return np.ones_like(scale)
    if lam == 0.0:
        return np.zeros_like(scale)
    return lam / (lam + scale)


def _dense_shrink_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """B (A + B)^{-1} for an explicit prior covariance."""
    total = np.diag(a) + b
    try:
        return np.linalg.solve(total.T, b.T).T
    except np.linalg.LinAlgError:
        raise SingularMatrixError("A + B is singular") from None


def apply_shrink(prior: GenericPrior, a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply B (A + B)^{-1} to a vector without materializing p x p matrices
    for the structured priors."""
    if prior.b_dense is not None:
        return _dense_shrink_matrix(a, prior.b_dense) @ v
    if prior.basis is None:
        return shrink_fraction(a, prior.lam) * v
    basis = prior.basis
    coef = shrink_fraction(basis.d, prior.lam) * basis.d
    return basis.z.T @ (coef * (basis.z @ (v / a)))


def trace_shrink_a(prior: GenericPrior, a: np.ndarray) -> float:
    """tr(B (A + B)^{-1} A)."""
    if prior.b_dense is not None:
        s = _dense_shrink_matrix(a, prior.b_dense)
        return float(np.sum(np.diag(s) * a))
    if prior.basis is None:
        return float(np.sum(shrink_fraction(a, prior.lam) * a))
    basis = prior.basis
    coef = shrink_fraction(basis.d, prior.lam) * basis.d
    return float(np.sum(coef * basis.zzt_diag))


def trace_shrink_a_shrink(prior: GenericPrior, a: np.ndarray) -> float:
    """tr(B (A + B)^{-1} A (A + B)^{-1} B), the variance part of the risk."""
    if prior.b_dense is not None:
        s = _dense_shrink_matrix(a, prior.b_dense)
        return float(np.sum(s * s * a[None, :]))
    if prior.basis is None:
        frac = shrink_fraction(a, prior.lam)
        return float(np.sum(frac * frac * a))
    basis = prior.basis
    frac = shrink_fraction(basis.d, prior.lam)
    return float(np.sum(frac * frac * basis.d * basis.zzt_diag))


def generic_shrinkage(data: HeteroData, prior: GenericPrior) -> np.ndarray:
    """Posterior-mean estimate B (A+B)^{-1} Y + A (A+B)^{-1} mu."""
    resid = data.y - prior.mu
    return prior.mu + apply_shrink(prior, data.a, resid)


def posterior_mean_model1(data: HeteroData, params: ModelIParams) -> np.ndarray:
    """Componentwise shrinkage lam/(lam+A_i) * Y_i + A_i/(lam+A_i) * mu_i."""
    frac = shrink_fraction(data.a, params.lam)
    return frac * data.y + (1.0 - frac) * params.mu


def posterior_mean_model2(
    data: HeteroData, params: ModelIIParams
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient shrinkage toward beta0 under prior scale lam * W.

    Returns (theta_hat, beta_hat) with
    beta_hat = lam W (lam W + V)^{-1} beta_wls + V (lam W + V)^{-1} beta0,
    V = (X A^{-1} X^T)^{-1}; lam = +inf gives beta_hat = beta_wls exactly.
    """
    beta_wls, _ = wls_location(data.x, data.y, data.a)
    if math.isinf(params.lam):
        beta_hat = beta_wls
    else:
        basis = shrink_basis(data.x, data.a, params.w)
        total = params.lam * params.w + basis.v
        try:
            t_wls = np.linalg.solve(total, beta_wls)
            t_prior = np.linalg.solve(total, params.beta0)
        except np.linalg.LinAlgError:
            raise SingularMatrixError("lam W + V is singular") from None
        beta_hat = params.lam * (params.w @ t_wls) + basis.v @ t_prior
    return data.x.entries.T @ beta_hat, beta_hat
