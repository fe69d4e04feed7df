"""Batting-average prediction pipeline.

First-half batting records are variance-stabilized with
y = arcsin(sqrt((h + 1/4) / (n + 1/2))), variance 1/(4n); estimators fitted
on the first half predict the second half, validated by the total squared
error net of the sampling variances.  Reported ratios are against the naive
estimator that predicts the second half with the first-half transform.

Input CSV schema: header `player_id,pitcher,ab1,h1,ab2,h2` with pitcher in
{0,1}; malformed rows abort with their line numbers (silent dropping would
corrupt the eligibility counts).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShrinkageError
from .linalg import DesignMatrix, _as_vector
from .methods import METHODS, apply_method
from .models import HeteroData
from .risk import MembershipSpec

GROUPS = ("all", "pitchers", "nonpitchers")
COVARIATES = ("at-bats", "pitcher")
AT_BATS_FORMS = ("raw", "sqrt", "log")
DEFAULT_ESTIMATORS = (
    "naive", "ols", "wls", "ebmom", "ebmle", "js",
    "ure-ols", "ure-wls", "ure", "ure-sp-ols", "ure-sp-wls", "ure-sp",
)

REPORT_CSV_HEADER = "estimator,covariates,tse_ratio,p_est,p_val,failures"
FACTORS_CSV_HEADER = "player_id,estimator,factor,variance"
BATTING_CSV_HEADER = ["player_id", "pitcher", "ab1", "h1", "ab2", "h2"]


@dataclass(frozen=True)
class BattingRecord:
    """Per-player at-bats and hits for the two half-seasons."""

    player_id: str
    pitcher: bool
    n1: int
    h1: int
    n2: int
    h2: int

    def __post_init__(self):
        for n, h, half in ((self.n1, self.h1, 1), (self.n2, self.h2, 2)):
            if n < 0 or h < 0 or h > n:
                raise ValueError(
                    f"player {self.player_id}: need 0 <= hits <= at-bats in half {half}"
                )


@dataclass(frozen=True)
class EmpiricalConfig:
    group: str = "all"
    covariates: tuple[str, ...] = ("at-bats", "pitcher")
    at_bats_form: str = "sqrt"
    min_ab_train: int = 11
    min_ab_valid: int = 11
    estimators: tuple[str, ...] = DEFAULT_ESTIMATORS
    model: int = 1  # coefficient shrinkage (model 2, unit W) behind this flag

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}")
        if self.model not in (1, 2):
            raise ValueError("model must be 1 or 2")
        unknown = [c for c in self.covariates if c not in COVARIATES]
        if unknown:
            raise ValueError(f"unknown covariates: {unknown}")
        if "pitcher" in self.covariates and self.group != "all":
            raise ValueError("the pitcher flag is only a covariate for group 'all'")
        if self.at_bats_form not in AT_BATS_FORMS:
            raise ValueError(f"at_bats_form must be one of {AT_BATS_FORMS}")
        bad = [e for e in self.estimators if e not in METHODS or e in ("or", "ol")]
        if bad:
            raise ValueError(f"estimators not usable on real data: {bad}")
        if self.model == 2:
            unsupported = [e for e in self.estimators if e in ("ure-sp-ols", "ure-sp-wls")]
            if unsupported:
                raise ValueError(
                    f"coefficient shrinkage has no GLS-target semiparametric variants: {unsupported}"
                )

    @property
    def with_covariates(self) -> bool:
        return len(self.covariates) > 0


@dataclass(frozen=True)
class ValidationTargets:
    """Second-half targets for the validation subset of the estimation set."""

    indices: np.ndarray  # positions within the estimation arrays
    y2: np.ndarray
    n2: np.ndarray


@dataclass(frozen=True)
class ReportRow:
    estimator: str
    covariates: bool
    tse_ratio: float
    failed: bool = False
    error: str | None = None


@dataclass
class PredictionReport:
    rows: list[ReportRow]
    p_estimation: int
    p_validation: int
    factors: list[tuple[str, str, float, float]] = field(default_factory=list)

    def ratio_of(self, estimator: str) -> float:
        for row in self.rows:
            if row.estimator == estimator:
                return row.tse_ratio
        raise KeyError(estimator)

    def report_csv(self) -> str:
        lines = [REPORT_CSV_HEADER]
        for row in self.rows:
            cov = "yes" if row.covariates else "no"
            lines.append(
                f"{row.estimator},{cov},{row.tse_ratio!r},"
                f"{self.p_estimation},{self.p_validation},{int(row.failed)}"
            )
        return "\n".join(lines) + "\n"

    def factors_csv(self) -> str:
        lines = [FACTORS_CSV_HEADER]
        for player_id, estimator, factor, variance in self.factors:
            lines.append(f"{player_id},{estimator},{factor!r},{variance!r}")
        return "\n".join(lines) + "\n"


def transform_batting(h: int, n: int) -> tuple[float, float]:
    """Variance-stabilized batting score and its sampling variance.

    Returns (arcsin(sqrt((h + 1/4) / (n + 1/2))), 1/(4n)); n must be >= 1
    (players without at-bats are filtered upstream).
    """
    if n < 1:
        raise ValueError("transform needs at least one at-bat")
    if h < 0 or h > n:
        raise ValueError("need 0 <= h <= n")
    return math.asin(math.sqrt((h + 0.25) / (n + 0.5))), 1.0 / (4.0 * n)


def tse(theta_hat, y2, n2) -> float:
    """Total squared prediction error net of the second-half sampling
    variances: sum (y2 - theta_hat)^2 - sum 1/(4 n2).  May be negative."""
    theta_hat = _as_vector(theta_hat, name="theta_hat")
    y2 = _as_vector(y2, len(theta_hat), "y2")
    n2 = np.asarray(n2, dtype=float)
    if n2.shape != theta_hat.shape:
        raise ValueError("n2 has wrong length")
    diff = y2 - theta_hat
    return float(diff @ diff) - float(np.sum(1.0 / (4.0 * n2)))


def read_batting_csv(path) -> list[BattingRecord]:
    """Parse the strict batting CSV; any malformed row aborts the run with
    its line number."""
    records: list[BattingRecord] = []
    problems: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if [c.strip() for c in header] != BATTING_CSV_HEADER:
            raise ValueError(
                f"{path}: bad header {header!r}, expected {','.join(BATTING_CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 6:
                problems.append(f"line {lineno}: expected 6 fields, got {len(row)}")
                continue
            pid, pitcher_s, n1_s, h1_s, n2_s, h2_s = (c.strip() for c in row)
            try:
                if pitcher_s not in ("0", "1"):
                    raise ValueError("pitcher flag must be 0 or 1")
                record = BattingRecord(
                    player_id=pid,
                    pitcher=pitcher_s == "1",
                    n1=int(n1_s), h1=int(h1_s), n2=int(n2_s), h2=int(h2_s),
                )
            except ValueError as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            records.append(record)
    if problems:
        raise ValueError(f"{path}: malformed rows: " + "; ".join(problems))
    return records


def _covariate_value(n1: int, form: str) -> float:
    if form == "raw":
        return float(n1)
    if form == "sqrt":
        return math.sqrt(n1)
    return math.log(n1)


def _estimation_records(
    records: list[BattingRecord], config: EmpiricalConfig
) -> list[BattingRecord]:
    if config.group == "pitchers":
        pool = [r for r in records if r.pitcher]
    elif config.group == "nonpitchers":
        pool = [r for r in records if not r.pitcher]
    else:
        pool = list(records)
    return [r for r in pool if r.n1 >= max(config.min_ab_train, 1)]


def build_design(
    records: list[BattingRecord], config: EmpiricalConfig
) -> tuple[HeteroData, ValidationTargets]:
    """Assemble the first-half estimation data and second-half validation
    targets.  Estimation keeps records with n1 >= min_ab_train (within the
    requested group); validation additionally requires n2 >= min_ab_valid.
    Filtering never looks at the covariate configuration."""
    train = _estimation_records(records, config)
    if not train:
        raise ValueError("estimation set is empty after filtering")

    y = np.empty(len(train))
    a = np.empty(len(train))
    for i, rec in enumerate(train):
        y[i], a[i] = transform_batting(rec.h1, rec.n1)

    rows = [np.ones(len(train))]
    if "at-bats" in config.covariates:
        rows.append(np.array([_covariate_value(r.n1, config.at_bats_form) for r in train]))
    if "pitcher" in config.covariates:
        rows.append(np.array([1.0 if r.pitcher else 0.0 for r in train]))
    data = HeteroData(y=y, a=a, x=DesignMatrix(np.vstack(rows)))

    valid_idx = [i for i, r in enumerate(train) if r.n2 >= max(config.min_ab_valid, 1)]
    y2 = np.array([transform_batting(train[i].h2, train[i].n2)[0] for i in valid_idx])
    n2 = np.array([train[i].n2 for i in valid_idx], dtype=float)
    targets = ValidationTargets(np.asarray(valid_idx, dtype=int), y2, n2)
    return data, targets


def run_empirical(
    records: list[BattingRecord], config: EmpiricalConfig,
    membership: MembershipSpec = MembershipSpec(),
) -> PredictionReport:
    """Fit every requested estimator on the first half and score its
    second-half predictions against the naive benchmark."""
    data, targets = build_design(records, config)
    train_ids = [r.player_id for r in _estimation_records(records, config)]
    idx = targets.indices
    naive_tse = tse(data.y[idx], targets.y2, targets.n2)

    rows: list[ReportRow] = []
    factors: list[tuple[str, str, float, float]] = []
    for est in config.estimators:
        if est == "naive":
            rows.append(ReportRow("naive", config.with_covariates, 1.0))
            for pid, var in zip(train_ids, data.a):
                factors.append((pid, "naive", 1.0, float(var)))
            continue
        try:
            result = apply_method(est, data, model=config.model, membership=membership)
        except ShrinkageError as exc:
            rows.append(
                ReportRow(est, config.with_covariates, math.nan, failed=True, error=str(exc))
            )
            continue
        ratio = tse(result.theta_hat[idx], targets.y2, targets.n2) / naive_tse
        rows.append(ReportRow(est, config.with_covariates, ratio))
        if result.factor is not None:
            for pid, fac, var in zip(train_ids, result.factor, data.a):
                factors.append((pid, est, float(fac), float(var)))
    return PredictionReport(
        rows=rows,
        p_estimation=data.p,
        p_validation=len(idx),
        factors=factors,
    )
