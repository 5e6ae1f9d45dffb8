"""Hyperparameter transfer across developer adjustments.

Search spaces and their old/new decomposition (:mod:`htaa.space`), a TPE
optimiser (:mod:`htaa.tpe`), transfer strategies (:mod:`htaa.transfer`),
fANOVA importance (:mod:`htaa.fanova`), benchmarks (:mod:`htaa.benchmarks`)
and the evaluation harness (:mod:`htaa.harness`).
"""

from htaa._kernels import BACKEND
from htaa.space import (
    Categorical,
    LogUniformFloat,
    SearchSpace,
    UniformFloat,
    UniformInt,
    decompose,
    sample_prior,
    validate,
)
from htaa.tpe import History, Trial, fit_tpe, suggest_tpe, tpe_step
from htaa.transfer import STRATEGIES, TransferContext, make_strategy

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Categorical",
    "History",
    "LogUniformFloat",
    "STRATEGIES",
    "SearchSpace",
    "TransferContext",
    "Trial",
    "UniformFloat",
    "UniformInt",
    "decompose",
    "fit_tpe",
    "make_strategy",
    "sample_prior",
    "suggest_tpe",
    "tpe_step",
    "validate",
]
