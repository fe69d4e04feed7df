"""Seeded data generators and the Monte Carlo risk-curve experiment.

Randomness is fully determined by one 64-bit seed.  Streams are derived with
numpy's SeedSequence spawn keys: the covariate matrix for unit count p uses
spawn key (p, 0) and replication r uses (p, r), so replications are
independent, order-insensitive, and reproducible regardless of which
estimators run.  Generators draw with PCG64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShrinkageError
from .linalg import DesignMatrix
from .methods import METHODS, apply_method
from .models import GroundTruth, HeteroData
from .risk import loss

DEFAULT_BETA = (-1.5, 4.0, -3.0)
DEFAULT_ESTIMATORS = ("ure", "ure-ols", "ure-sp", "ure-sp-ols", "ebmle", "ebmom", "js", "or")
VARIANCE_MODES = ("as-written", "variance-matched")

RISK_CSV_HEADER = "p,estimator,mean_loss,std_error,reps,failures"


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulation experiment."""

    example: int = 1
    p_grid: tuple[int, ...] = tuple(range(20, 501, 20))
    reps: int = 5000
    seed: int = 0
    beta_true: tuple[float, ...] = DEFAULT_BETA
    estimators: tuple[str, ...] = DEFAULT_ESTIMATORS
    example2_variance_mode: str = "as-written"

    def __post_init__(self):
        if self.example not in (1, 2):
            raise ValueError("example must be 1 or 2")
        grid = tuple(int(p) for p in self.p_grid)
        if not grid or any(p <= 0 for p in grid) or list(grid) != sorted(grid):
            raise ValueError("p_grid must be positive and ascending")
        object.__setattr__(self, "p_grid", grid)
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        unknown = [e for e in self.estimators if e not in METHODS]
        if unknown:
            raise ValueError(f"unknown estimators: {unknown}")
        if self.example2_variance_mode not in VARIANCE_MODES:
            raise ValueError(f"variance mode must be one of {VARIANCE_MODES}")


@dataclass(frozen=True)
class RiskPoint:
    p: int
    estimator: str
    mean_loss: float
    std_error: float
    reps: int
    failures: int


@dataclass(frozen=True)
class RiskCurve:
    """Per-(p, estimator) Monte Carlo mean losses with standard errors."""

    points: tuple[RiskPoint, ...] = field(default_factory=tuple)

    def to_csv(self) -> str:
        lines = [RISK_CSV_HEADER]
        for pt in self.points:
            lines.append(
                f"{pt.p},{pt.estimator},{pt.mean_loss!r},{pt.std_error!r},{pt.reps},{pt.failures}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())

    def mean_loss_of(self, p: int, estimator: str) -> float:
        for pt in self.points:
            if pt.p == p and pt.estimator == estimator:
                return pt.mean_loss
        raise KeyError((p, estimator))

    def point(self, p: int, estimator: str) -> RiskPoint:
        for pt in self.points:
            if pt.p == p and pt.estimator == estimator:
                return pt
        raise KeyError((p, estimator))


def _rng(seed: int, p: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(p, r)))


def gen_covariates(p: int, k: int, rng: np.random.Generator) -> DesignMatrix:
    """k x p covariate matrix with entries i.i.d. Uniform(-10, 10)."""
    if k > p:
        raise ValueError("need k <= p")
    return DesignMatrix(rng.uniform(-10.0, 10.0, size=(k, p)))


def gen_example1(
    p: int, x: DesignMatrix, beta, rng: np.random.Generator
) -> tuple[HeteroData, GroundTruth]:
    """Two-group variances: A_i is 0.1 or 0.5 with equal probability, the
    low-variance group carries a +2 mean offset, and Y is Gaussian."""
    beta = np.asarray(beta, dtype=float)
    a = rng.choice([0.1, 0.5], size=p)
    loc = 2.0 * (a == 0.1) + x.entries.T @ beta
    theta = rng.normal(loc, 0.5)
    y = rng.normal(theta, np.sqrt(a))
    return HeteroData(y=y, a=a, x=x), GroundTruth(theta)


def gen_example2(
    p: int, x: DesignMatrix, beta, rng: np.random.Generator,
    mode: str = "as-written",
) -> tuple[HeteroData, GroundTruth]:
    """Uniform variances on (0.1, 1), deterministic means theta = A + X'beta,
    and uniform (non-normal) observation noise.

    mode "as-written" uses half-width sqrt(3)*A_i (so Var(Y_i) = A_i^2);
    "variance-matched" uses half-width sqrt(3*A_i) so that Var(Y_i) = A_i.
    """
    if mode not in VARIANCE_MODES:
        raise ValueError(f"variance mode must be one of {VARIANCE_MODES}")
    beta = np.asarray(beta, dtype=float)
    a = rng.uniform(0.1, 1.0, size=p)
    theta = a + x.entries.T @ beta
    half = math.sqrt(3.0) * a if mode == "as-written" else np.sqrt(3.0 * a)
    y = rng.uniform(theta - half, theta + half)
    return HeteroData(y=y, a=a, x=x), GroundTruth(theta)


def run_risk_experiment(config: SimConfig) -> RiskCurve:
    """Monte Carlo loss curves: per unit count p the covariates are drawn
    once, then each replication draws fresh (A, theta, Y), fits every
    requested estimator on the same data, and records its loss.  Estimator
    failures are counted, not raised."""
    k = len(config.beta_true)
    points: list[RiskPoint] = []
    for p in config.p_grid:
        x = gen_covariates(p, k, _rng(config.seed, p, 0))
        losses: dict[str, list[float]] = {est: [] for est in config.estimators}
        failures: dict[str, int] = {est: 0 for est in config.estimators}
        for r in range(1, config.reps + 1):
            rng = _rng(config.seed, p, r)
            if config.example == 1:
                data, truth = gen_example1(p, x, config.beta_true, rng)
            else:
                data, truth = gen_example2(
                    p, x, config.beta_true, rng, config.example2_variance_mode
                )
            for est in config.estimators:
                try:
                    result = apply_method(est, data, truth=truth)
                except ShrinkageError:
                    failures[est] += 1
                    continue
                losses[est].append(loss(truth.theta, result.theta_hat))
        for est in config.estimators:
            vals = np.asarray(losses[est])
            n = len(vals)
            if n == 0:
                mean, se = math.nan, math.nan
            else:
                mean = float(np.mean(vals))
                se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            points.append(RiskPoint(p, est, mean, se, n, failures[est]))
    return RiskCurve(tuple(points))
