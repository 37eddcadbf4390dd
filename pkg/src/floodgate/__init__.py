"""Confidence intervals for total-order sensitivity indices from surrogate models."""

from floodgate.dataset import EvaluatedDataset, load_dataset, save_dataset
from floodgate.errors import DegenerateInputError, FormatError, NumericalError
from floodgate.estimators import (
    METHODS,
    IntervalResult,
    build_paired_dataset,
    floodgate_all_inputs,
    floodgate_interval,
    floodgate_terms,
    panin_all_inputs,
    panin_bound,
    panin_interval,
    panin_terms,
    spf_jansen,
    spf_surrogate,
)
from floodgate.harness import (
    BudgetPlan,
    CoverageReport,
    ExperimentConfig,
    GroundTruth,
    apply_to_existing_dataset,
    ground_truth,
    run_coverage_experiment,
    run_width_curve,
    train_surrogate,
)
from floodgate.space import InputSpace, sample_iid, sample_lhs_batches
from floodgate.surrogate import KrrModel, LinearSurrogate, estimate_relative_mse, fit_krr

__all__ = [
    "METHODS",
    "BudgetPlan",
    "CoverageReport",
    "DegenerateInputError",
    "EvaluatedDataset",
    "ExperimentConfig",
    "FormatError",
    "GroundTruth",
    "InputSpace",
    "IntervalResult",
    "KrrModel",
    "LinearSurrogate",
    "NumericalError",
    "apply_to_existing_dataset",
    "build_paired_dataset",
    "estimate_relative_mse",
    "fit_krr",
    "floodgate_all_inputs",
    "floodgate_interval",
    "floodgate_terms",
    "ground_truth",
    "load_dataset",
    "panin_all_inputs",
    "panin_bound",
    "panin_interval",
    "panin_terms",
    "run_coverage_experiment",
    "run_width_curve",
    "sample_iid",
    "sample_lhs_batches",
    "save_dataset",
    "spf_jansen",
    "spf_surrogate",
    "train_surrogate",
]
