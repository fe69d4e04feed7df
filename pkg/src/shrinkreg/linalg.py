"""Dense linear-algebra kernels shared by all estimators.

Covariates live in the columns of a k x p matrix X (one column per unit), so
regression fits solve X W X^T beta = X W y.  Normal equations go through a QR
factorization of the weighted design rather than explicit inversion, and the
weighted Gram matrix is condition-checked so near-collinear designs fail
loudly instead of silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMatrixError

# Reject weighted Gram matrices with 2-norm condition beyond this.
COND_LIMIT = 1e12


def _as_vector(v, p: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if p is not None and v.shape[0] != p:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {p}")
    return v


@dataclass(frozen=True)
class DesignMatrix:
    """Covariate matrix with one column per statistical unit.

    entries has shape (k, p) with k <= p, full rank k, finite values.
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        object.__setattr__(self, "entries", entries)
        k, p = entries.shape
        if k > p:
            raise ValueError(f"need k <= p, got k={k}, p={p}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("covariate matrix contains non-finite entries")
        if np.linalg.matrix_rank(entries) != k:
            raise ValueError("covariate matrix is rank deficient")

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def intercept_only(cls, p: int) -> "DesignMatrix":
        return cls(np.ones((1, p)))


@dataclass(frozen=True)
class ShrinkBasis:
    """Spectral basis for rank-k shrinkage with a k x k prior scale W.

    Diagonalizes W^{-1/2} V W^{-1/2} = U diag(d) U^T with V = (X A^{-1} X^T)^{-1}
    and d ascending; z = U^T W^{1/2} X is the transformed covariate matrix.
    """

    z: np.ndarray  # (k, p)
    d: np.ndarray  # (k,) ascending, nonnegative
    u: np.ndarray  # (k, k) orthogonal
    v: np.ndarray  # (k, k) = (X A^{-1} X^T)^{-1}
    w_sqrt: np.ndarray = field(repr=False)  # (k, k) symmetric square root of W
    w_inv_sqrt: np.ndarray = field(repr=False)  # (k, k) inverse square root of W

    @property
    def k(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        return self.z.shape[1]

    @property
    def zzt_diag(self) -> np.ndarray:
        """Diagonal of Z Z^T, the per-coordinate design energies."""
        return np.einsum("ij,ij->i", self.z, self.z)

    def to_spectral(self, beta: np.ndarray) -> np.ndarray:
        """Map a coefficient vector to the spectral coordinates U^T W^{-1/2} beta."""
        return self.u.T @ (self.w_inv_sqrt @ np.asarray(beta, dtype=float))

    def from_spectral(self, gamma: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_spectral`: beta = W^{1/2} U gamma."""
        return self.w_sqrt @ (self.u @ np.asarray(gamma, dtype=float))

    def mu_from_spectral(self, gamma: np.ndarray) -> np.ndarray:
        """Fitted unit-level locations X^T beta expressed as Z^T gamma."""
        return self.z.T @ np.asarray(gamma, dtype=float)


def _check_spd(m: np.ndarray, name: str = "M") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    sym_err = np.max(np.abs(m - m.T))
    scale = max(1.0, float(np.max(np.abs(m))))
    if sym_err > 1e-10 * scale:
        raise ValueError(f"{name} is not symmetric (max asymmetry {sym_err:.2e})")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} is not positive definite") from None
    return m


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, context: str) -> np.ndarray:
    """Solve a symmetric Gram system with a condition guard."""
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(
            f"{context}: weighted Gram matrix condition {cond:.2e} exceeds {COND_LIMIT:.0e}"
        )
    return np.linalg.solve(gram, rhs)


def gls_fit(x: DesignMatrix, y, weights) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least squares fit of y on the columns of x.

    Minimizes sum_i weights_i * (y_i - X_i^T beta)^2 over beta and returns
    (beta, mu) with mu = X^T beta.  Weights must be strictly positive and
    finite.  Solved via QR of the row-weighted design; an ill-conditioned
    weighted Gram matrix raises SingularMatrixError.
    """
    y = _as_vector(y, x.p, "y")
    w = _as_vector(weights, x.p, "weights")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be strictly positive and finite")

    sw = np.sqrt(w)
    design = x.entries.T * sw[:, None]  # (p, k)
    gram = design.T @ design
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(
            f"gls_fit: weighted Gram matrix condition {cond:.2e} exceeds {COND_LIMIT:.0e}"
        )
    q, r = np.linalg.qr(design)
    beta = np.linalg.solve(r, q.T @ (sw * y))
    return beta, x.entries.T @ beta


def wls_location(x: DesignMatrix, y, a) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least squares location with precision weights 1/a."""
    a = _as_vector(a, x.p, "a")
    return gls_fit(x, y, 1.0 / a)


def ols_location(x: DesignMatrix, y) -> tuple[np.ndarray, np.ndarray]:
    """Ordinary least squares location (unit weights)."""
    return gls_fit(x, y, np.ones(x.p))


def rowspace_ls(x: DesignMatrix, c: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ||diag(c) X^T beta - target||^2 over beta; c may contain zeros.

    Shared inner step of the profile fitters.  Falls back to a min-norm
    least-squares solution when the scaled Gram matrix is singular (all the
    callers only need the achieved residual in that case).
    """
    design = x.entries.T * c[:, None]
    gram = design.T @ design
    rhs = design.T @ target
    try:
        beta = np.linalg.solve(gram, rhs)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(design, target, rcond=None)[0]
    return beta, x.entries.T @ beta


def projection_apply(x: DesignMatrix, m, v) -> np.ndarray:
    """Apply the oblique projection X^T (X M X^T)^{-1} X M to v.

    m is a symmetric positive definite p x p matrix, or a length-p vector of
    strictly positive entries standing for its diagonal.  The result lies in
    the row space of x and the map is idempotent.
    """
    v = _as_vector(v, x.p, "v")
    m_arr = np.asarray(m, dtype=float)
    if m_arr.ndim == 1:
        m_arr = _as_vector(m_arr, x.p, "m")
        if np.any(m_arr <= 0) or not np.all(np.isfinite(m_arr)):
            raise ValueError("diagonal of M must be strictly positive and finite")
        xm = x.entries * m_arr
    else:
        m_arr = _check_spd(m_arr, "M")
        if m_arr.shape[0] != x.p:
            raise ValueError(f"M has shape {m_arr.shape}, expected ({x.p}, {x.p})")
        xm = x.entries @ m_arr
    gram = xm @ x.entries.T
    gram = 0.5 * (gram + gram.T)
    coef = _solve_gram(gram, xm @ v, "projection_apply")
    return x.entries.T @ coef


def projection_diag(x: DesignMatrix, m) -> np.ndarray:
    """Diagonal of the projection matrix P_{M,X} for diagonal or full M."""
    m_arr = np.asarray(m, dtype=float)
    if m_arr.ndim == 1:
        xm = x.entries * m_arr
    else:
        xm = x.entries @ m_arr
    gram = xm @ x.entries.T
    gram = 0.5 * (gram + gram.T)
    sol = _solve_gram(gram, xm, "projection_diag")  # (k, p)
    return np.einsum("ip,ip->p", x.entries, sol)


def shrink_basis(x: DesignMatrix, a, w) -> ShrinkBasis:
    """Build the spectral shrink basis for prior covariance lambda * X^T W X.

    a is the vector of positive sampling variances; w is a k x k symmetric
    positive definite matrix.  Uses symmetric eigendecompositions throughout,
    so ties among the effective variances d are kept in stable ascending order.
    """
    a = _as_vector(a, x.p, "a")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("variances a must be strictly positive and finite")
    w = _check_spd(np.asarray(w, dtype=float), "W")
    if w.shape[0] != x.k:
        raise ValueError(f"W has shape {w.shape}, expected ({x.k}, {x.k})")

    gram = (x.entries / a) @ x.entries.T  # X A^{-1} X^T
    gram = 0.5 * (gram + gram.T)
    v = _solve_gram(gram, np.eye(x.k), "shrink_basis")
    v = 0.5 * (v + v.T)

    w_evals, w_evecs = np.linalg.eigh(w)
    if np.any(w_evals <= 0):
        raise ValueError("W is not positive definite")
    w_sqrt = (w_evecs * np.sqrt(w_evals)) @ w_evecs.T
    w_inv_sqrt = (w_evecs / np.sqrt(w_evals)) @ w_evecs.T

    core = w_inv_sqrt @ v @ w_inv_sqrt
    core = 0.5 * (core + core.T)
    d, u = np.linalg.eigh(core)  # ascending by construction
    d = np.maximum(d, 0.0)
    z = u.T @ (w_sqrt @ x.entries)
    return ShrinkBasis(z=z, d=d, u=u, v=v, w_sqrt=w_sqrt, w_inv_sqrt=w_inv_sqrt)


def geometric_mean(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    positive = values[values > 0]
    if positive.size == 0:
        return 1.0
    return float(math.exp(np.mean(np.log(positive))))
