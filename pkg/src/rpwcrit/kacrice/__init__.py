"""Kac-Rice densities for critical points of the random plane wave."""
from .covariance import (
    ONE_POINT,
    R_SWITCH,
    ConditionalCovariance,
    CovarianceBlocks,
    CovarianceError,
    OnePointCovariance,
    conditional_covariance,
    covariance_blocks,
    det_a,
    eigen_delta_closed,
    schur_delta,
)
from .series_check import QUANTITIES, SeriesCheck, SeriesReport, verify_all, verify_series
from .twopoint import (
    FactorialMomentEstimate,
    K2Estimate,
    TypedK2,
    TypePair,
    expected_count,
    expected_typed_counts,
    k1_density,
    k2,
    k2_all_types,
    k2_limit,
    k2_spherical_crosscheck,
    k2_typed,
    leading_factorial_moment,
    one_point_det_oracle,
    radial_constant,
    second_factorial_moment,
)

__all__ = [
    "ONE_POINT",
    "QUANTITIES",
    "R_SWITCH",
    "ConditionalCovariance",
    "CovarianceBlocks",
    "CovarianceError",
    "FactorialMomentEstimate",
    "K2Estimate",
    "OnePointCovariance",
    "SeriesCheck",
    "SeriesReport",
    "TypePair",
    "TypedK2",
    "conditional_covariance",
    "covariance_blocks",
    "det_a",
    "eigen_delta_closed",
    "expected_count",
    "expected_typed_counts",
    "k1_density",
    "k2",
    "k2_all_types",
    "k2_limit",
    "k2_spherical_crosscheck",
    "k2_typed",
    "leading_factorial_moment",
    "one_point_det_oracle",
    "radial_constant",
    "schur_delta",
    "second_factorial_moment",
    "verify_all",
    "verify_series",
]
