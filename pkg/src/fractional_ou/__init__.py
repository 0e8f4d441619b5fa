"""Least-squares drift estimation for a non-ergodic fractional Ornstein-Uhlenbeck process with periodic mean."""

from .asymptotics import (
    GaussianLimit,
    RatioLimit,
    ZeroIntegralVariance,
    fourier_kernel_integral,
    limit_cov_matrix,
    ratio_cdf,
    ratio_limit_params,
    zero_integral_variance,
    zero_integral_variance_integral,
    zero_integral_variance_series,
)
from .basis import DriftFunction, PeriodicBasis, custom_basis, fourier_basis, load_basis_file
from .estimator import EstimateResult, SingularQError, decompose_error, estimate
from .fbm import SamplePath, Seed, fbm_covariance, sample_fbm, sample_fgn
from .mc import ExperimentConfig, KSReport, cross_rate_correlation, ks_test, run_experiment
from .model import ModelParams, SimulatedPair, simulate

__all__ = [
    "DriftFunction",
    "EstimateResult",
    "ExperimentConfig",
    "GaussianLimit",
    "KSReport",
    "ModelParams",
    "PeriodicBasis",
    "RatioLimit",
    "SamplePath",
    "Seed",
    "SimulatedPair",
    "SingularQError",
    "ZeroIntegralVariance",
    "cross_rate_correlation",
    "custom_basis",
    "decompose_error",
    "estimate",
    "fbm_covariance",
    "fourier_basis",
    "fourier_kernel_integral",
    "ks_test",
    "limit_cov_matrix",
    "load_basis_file",
    "ratio_cdf",
    "ratio_limit_params",
    "run_experiment",
    "sample_fbm",
    "sample_fgn",
    "simulate",
    "zero_integral_variance",
    "zero_integral_variance_integral",
    "zero_integral_variance_series",
]
