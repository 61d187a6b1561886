"""Exact Shapley value explanations for feature groups under Gaussian features."""

__version__ = "0.1.0"

from .coalitions import (
    Coalition,
    FeaturePartition,
    enumerate_subsets,
    partition_from_json,
    shapley_weight,
    validate_partition,
)
from .contributions import (
    AnalyticEstimator,
    ContributionCache,
    MonteCarloEstimator,
    contribution_analytic,
    contribution_mc,
)
from .explainer import Explanation, feature_shapley, group_shapley, post_grouped_shapley
from .gaussian import (
    ConditionalGaussian,
    CorrelationDesign,
    GaussianModel,
    build_covariance,
    condition,
    gaussian_moments,
    sample,
)
from .models import (
    ModelSpec,
    NotSeparable,
    SimulationModelId,
    decompose_by_groups,
    evaluate,
    simulation_model,
    standardize,
)
from .theory import (
    check_contribution_identities,
    closed_form_group_values,
    simplified_feature_shapley,
)

__all__ = [
    "AnalyticEstimator",
    "Coalition",
    "ConditionalGaussian",
    "ContributionCache",
    "CorrelationDesign",
    "Explanation",
    "FeaturePartition",
    "GaussianModel",
    "ModelSpec",
    "MonteCarloEstimator",
    "NotSeparable",
    "SimulationModelId",
    "build_covariance",
    "check_contribution_identities",
    "closed_form_group_values",
    "condition",
    "contribution_analytic",
    "contribution_mc",
    "decompose_by_groups",
    "enumerate_subsets",
    "evaluate",
    "feature_shapley",
    "gaussian_moments",
    "group_shapley",
    "partition_from_json",
    "post_grouped_shapley",
    "sample",
    "shapley_weight",
    "simplified_feature_shapley",
    "simulation_model",
    "standardize",
    "validate_partition",
]
