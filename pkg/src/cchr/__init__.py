"""Complier causal hazard ratio estimation under dependent censoring."""

from .copulas import CopulaSpec, cdf, density, partial_u, partial_v, sample_pair, tau_from_xi, xi_from_tau
from .data import CovariateSchema, DataError, Dataset, load_dataset, write_dataset
from .fit import (
    DESK_OPTIMIZER,
    STUDY_OPTIMIZER,
    BootstrapResult,
    FitError,
    FitResult,
    OptimizerConfig,
    bootstrap,
    fit_two_step,
    maximize,
    select_model,
)
from .hazard import HazardError, StepHazard, Theta, fit_step_hazard, psi
from .margins import CensoringModel, ParametricBaseline, PHParams, cchr
from .simulate import DEFAULT_MC_KERNEL, MetricsReport, SimDesign, generate_dataset, make_preset, run_mc, sweep
from .weights import KernelConfig, TruncationBounds, WeightError, estimate_kappa

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MC_KERNEL",
    "DESK_OPTIMIZER",
    "STUDY_OPTIMIZER",
    "BootstrapResult",
    "CensoringModel",
    "CopulaSpec",
    "CovariateSchema",
    "DataError",
    "Dataset",
    "FitError",
    "FitResult",
    "HazardError",
    "KernelConfig",
    "MetricsReport",
    "OptimizerConfig",
    "PHParams",
    "ParametricBaseline",
    "SimDesign",
    "StepHazard",
    "Theta",
    "TruncationBounds",
    "WeightError",
    "bootstrap",
    "cchr",
    "cdf",
    "density",
    "estimate_kappa",
    "fit_step_hazard",
    "fit_two_step",
    "generate_dataset",
    "load_dataset",
    "make_preset",
    "maximize",
    "partial_u",
    "partial_v",
    "psi",
    "run_mc",
    "sample_pair",
    "select_model",
    "sweep",
    "tau_from_xi",
    "write_dataset",
    "xi_from_tau",
]
