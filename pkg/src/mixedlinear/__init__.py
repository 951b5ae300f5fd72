"""Exact recovery for mixtures of random linear equations.

Tensor-decomposition initialization followed by alternating minimization,
plus the synthetic experiment harness used to benchmark them.
"""

from mixedlinear.altmin import AltMinConfig, RunTrace, altmin_run, assign_labels, update_parameters
from mixedlinear.metrics import ErrorReport, estimation_error, label_accuracy
from mixedlinear.model import (
    Dataset,
    DifficultyReport,
    MixtureParams,
    difficulty,
    make_delta_spaced_params,
    sample_dataset,
)
from mixedlinear.moments import (
    compute_second_moments,
    compute_whitened_third_moment,
    expected_moments,
    t_map,
)
from mixedlinear.tensor_init import InitConfig, SpectralEstimate, tensor_init, tensor_init_from_population
from mixedlinear.tensor_power import EigenPair, PowerConfig, power_decompose, tensor_apply
from mixedlinear.whitening import Whitener, whiten

__all__ = [
    "AltMinConfig",
    "Dataset",
    "DifficultyReport",
    "EigenPair",
    "ErrorReport",
    "InitConfig",
    "MixtureParams",
    "PowerConfig",
    "RunTrace",
    "SpectralEstimate",
    "Whitener",
    "altmin_run",
    "assign_labels",
    "compute_second_moments",
    "compute_whitened_third_moment",
    "difficulty",
    "estimation_error",
    "expected_moments",
    "label_accuracy",
    "make_delta_spaced_params",
    "power_decompose",
    "sample_dataset",
    "t_map",
    "tensor_apply",
    "tensor_init",
    "tensor_init_from_population",
    "update_parameters",
    "whiten",
]
