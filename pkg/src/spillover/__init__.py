"""Causal effects of covariate-targeted treatment allocation in clustered experiments.

Estimates direct, indirect, and overall effects of hypothetical stochastic
allocation policies that fix the cluster-average treatment probability while
tilting individual treatment probabilities by covariates.  Clusters may
interfere internally (partial interference); estimation uses standardized
cluster-level inverse-probability weights with M-estimation or cluster
bootstrap uncertainty, plus a Monte-Carlo max-range test for effect
heterogeneity across targeting strategies.
"""

from .data import (
    ClusterData,
    DataFormatError,
    Dataset,
    DesignPropensity,
    PositivityError,
    UnitRecord,
    ValidationReport,
    load_dataset,
    log_design_prob,
    validate_assumptions,
    write_dataset,
)
from .allocation import (
    AllocationPolicy,
    SolvedPolicy,
    log_policy_prob,
    log_policy_prob_loo,
    solve_intercept,
    solve_policy,
    unit_propensities,
)
from .estimators import (
    DegenerateArmError,
    EffectReport,
    MuSet,
    cluster_weight,
    contrast_effects,
    estimate_mu,
    estimate_mu_fixed,
    estimate_mu_set,
    unit_weight_fixed,
)
from .inference import (
    BootstrapResult,
    PsiMatrix,
    SandwichCovariance,
    cluster_bootstrap,
    effect_covariance,
    psi_contributions,
    sandwich_covariance,
    wald_ci,
)
from .gamma_grid import (
    GammaRange,
    gamma_range,
    materialize_grid,
    per_cluster_logit_slope,
)
from .het_test import HetTestResult, het_test, null_distribution, range_statistic
from .simgen import (
    Scenario1Params,
    Scenario2Params,
    TrueEffects,
    correlated_binary,
    exact_potential_means,
    exact_scenario2_effects,
    gen_scenario1,
    gen_scenario2,
    oracle_true_effects,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationPolicy",
    "BootstrapResult",
    "ClusterData",
    "DataFormatError",
    "Dataset",
    "DegenerateArmError",
    "DesignPropensity",
    "EffectReport",
    "GammaRange",
    "HetTestResult",
    "MuSet",
    "PositivityError",
    "PsiMatrix",
    "SandwichCovariance",
    "Scenario1Params",
    "Scenario2Params",
    "SolvedPolicy",
    "TrueEffects",
    "UnitRecord",
    "ValidationReport",
    "cluster_bootstrap",
    "cluster_weight",
    "contrast_effects",
    "correlated_binary",
    "effect_covariance",
    "estimate_mu",
    "estimate_mu_fixed",
    "estimate_mu_set",
    "exact_potential_means",
    "exact_scenario2_effects",
    "gamma_range",
    "gen_scenario1",
    "gen_scenario2",
    "het_test",
    "load_dataset",
    "log_design_prob",
    "log_policy_prob",
    "log_policy_prob_loo",
    "materialize_grid",
    "null_distribution",
    "oracle_true_effects",
    "per_cluster_logit_slope",
    "psi_contributions",
    "range_statistic",
    "sandwich_covariance",
    "solve_intercept",
    "solve_policy",
    "unit_propensities",
    "unit_weight_fixed",
    "validate_assumptions",
    "wald_ci",
    "write_dataset",
]
