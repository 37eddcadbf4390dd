from floodgate.models.base import CountingModel, ModelFunction
from floodgate.models.benchmarks import (
    AdditiveLinear,
    Constant,
    Ishigami,
    SparseInteraction,
    additive_linear,
    ishigami,
    synthetic_highdim,
)
from floodgate.models.hymod import (
    DEFAULT_TRUE_PARAMS,
    HYMOD_NAMES,
    HYMOD_RANGES,
    ForcingSeries,
    HymodNSE,
    HymodParams,
    hymod_nse_response,
    hymod_simulate,
    hymod_space,
    nse,
    synthetic_forcing,
)

__all__ = [
    "AdditiveLinear",
    "Constant",
    "CountingModel",
    "DEFAULT_TRUE_PARAMS",
    "ForcingSeries",
    "HYMOD_NAMES",
    "HYMOD_RANGES",
    "HymodNSE",
    "HymodParams",
    "Ishigami",
    "ModelFunction",
    "SparseInteraction",
    "additive_linear",
    "hymod_nse_response",
    "hymod_simulate",
    "hymod_space",
    "ishigami",
    "nse",
    "synthetic_forcing",
    "synthetic_highdim",
]
