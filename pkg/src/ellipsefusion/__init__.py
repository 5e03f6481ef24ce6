"""Fusion of elliptic extended-target estimates in Gaussian Wasserstein
geometry: square-root-space transform, analytic Jacobian, Monte-Carlo
moment matching, baseline fusers, GW metrics, and a seeded evaluation
harness."""

from .core import (
    EllipseState,
    ShapeMatrix,
    TransformedState,
    ellipse_from_shape,
    equivalent_parametrizations,
    inverse_transform,
    jacobian,
    permute_covariance,
    shape_matrix,
    sqrt_spd,
    transform,
    transform_batch,
)
from .errors import (
    EllipseFusionError,
    FusionNumericsError,
    IndefiniteMatrixError,
    InvalidInputError,
    JacobianSingularError,
)
from .fusion import (
    METHODS,
    FusionInput,
    FusionResult,
    GaussianEstimate,
    TransformedGaussian,
    check_covariance,
    fuse,
    fuse_heuristic,
    fuse_mmgw_lin,
    fuse_mmgw_mc,
    fuse_naive,
    fuse_shape_mean,
    transformed_moments,
)
from .harness import (
    MethodResult,
    RunReport,
    ScenarioConfig,
    covariance_from_json,
    deserialize_report,
    generate_trial,
    reference_config,
    run_experiment,
    serialize_report,
)
from .metrics import aggregate_rmgw, gw_approx, gw_approx_frobenius, gw_exact

__version__ = "0.1.0"

__all__ = [
    "EllipseState",
    "ShapeMatrix",
    "TransformedState",
    "GaussianEstimate",
    "TransformedGaussian",
    "FusionInput",
    "FusionResult",
    "MethodResult",
    "RunReport",
    "ScenarioConfig",
    "METHODS",
    "EllipseFusionError",
    "InvalidInputError",
    "IndefiniteMatrixError",
    "JacobianSingularError",
    "FusionNumericsError",
    "aggregate_rmgw",
    "check_covariance",
    "covariance_from_json",
    "deserialize_report",
    "ellipse_from_shape",
    "equivalent_parametrizations",
    "fuse",
    "fuse_heuristic",
    "fuse_mmgw_lin",
    "fuse_mmgw_mc",
    "fuse_naive",
    "fuse_shape_mean",
    "generate_trial",
    "gw_approx",
    "gw_approx_frobenius",
    "gw_exact",
    "inverse_transform",
    "jacobian",
    "permute_covariance",
    "reference_config",
    "run_experiment",
    "serialize_report",
    "shape_matrix",
    "sqrt_spd",
    "transform",
    "transform_batch",
    "transformed_moments",
]
