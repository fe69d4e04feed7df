"""Shrinkage estimation for heteroscedastic hierarchical linear models.

Exact risk and unbiased-risk-estimate (URE) formulas, parametric and
monotone semiparametric URE fitters, empirical-Bayes and James-Stein
baselines, a seeded Monte Carlo experiment runner, and a batting-average
prediction pipeline.
"""

from .baseball import (
    BattingRecord,
    EmpiricalConfig,
    PredictionReport,
    build_design,
    read_batting_csv,
    run_empirical,
    transform_batting,
    tse,
)
from .errors import ConvergenceError, ShrinkageError, SingularMatrixError
from .estimators import (
    GlsTarget,
    ParametricFit,
    fit_ebmle,
    fit_ebmom,
    fit_james_stein,
    fit_oracle,
    fit_ure,
    fit_ure_gls,
)
from .linalg import DesignMatrix, ShrinkBasis, gls_fit, projection_apply, shrink_basis
from .methods import METHODS, MethodResult, apply_method
from .models import (
    GenericPrior,
    GroundTruth,
    HeteroData,
    ModelIParams,
    ModelIIParams,
    generic_shrinkage,
    posterior_mean_model1,
    posterior_mean_model2,
)
from .risk import (
    ConditionDiagnostics,
    MembershipSpec,
    WeightedLossSpec,
    condition_diagnostics,
    exact_risk,
    in_l,
    loss,
    ure,
    ure_gls,
    ure_sp_model1,
    ure_sp_model2,
    ure_weighted,
    weighted_loss,
)
from .semiparam import (
    MonotoneVector,
    SemiparamFit,
    fit_ure_sp_model1,
    fit_ure_sp_model2,
    fit_ure_sp_weighted,
    pava_weighted,
)
from .simulate import (
    RiskCurve,
    RiskPoint,
    SimConfig,
    gen_covariates,
    gen_example1,
    gen_example2,
    run_risk_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BattingRecord",
    "ConditionDiagnostics",
    "ConvergenceError",
    "DesignMatrix",
    "EmpiricalConfig",
    "GenericPrior",
    "GlsTarget",
    "GroundTruth",
    "HeteroData",
    "METHODS",
    "MembershipSpec",
    "MethodResult",
    "ModelIIParams",
    "ModelIParams",
    "MonotoneVector",
    "ParametricFit",
    "PredictionReport",
    "RiskCurve",
    "RiskPoint",
    "SemiparamFit",
    "ShrinkBasis",
    "ShrinkageError",
    "SimConfig",
    "SingularMatrixError",
    "WeightedLossSpec",
    "apply_method",
    "build_design",
    "condition_diagnostics",
    "exact_risk",
    "fit_ebmle",
    "fit_ebmom",
    "fit_james_stein",
    "fit_oracle",
    "fit_ure",
    "fit_ure_gls",
    "fit_ure_sp_model1",
    "fit_ure_sp_model2",
    "fit_ure_sp_weighted",
    "gen_covariates",
    "gen_example1",
    "gen_example2",
    "generic_shrinkage",
    "gls_fit",
    "in_l",
    "loss",
    "pava_weighted",
    "posterior_mean_model1",
    "posterior_mean_model2",
    "projection_apply",
    "read_batting_csv",
    "run_empirical",
    "run_risk_experiment",
    "shrink_basis",
    "transform_batting",
    "tse",
    "ure",
    "ure_gls",
    "ure_sp_model1",
    "ure_sp_model2",
    "ure_weighted",
    "weighted_loss",
]
