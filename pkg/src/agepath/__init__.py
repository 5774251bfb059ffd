"""Age-path engine for self-paced learning.

Computes the exact solution path of self-paced SVM, Lasso, and logistic
regression models as a function of the age parameter lambda, by tracking
the KKT system of each partition segment with an adaptive ODE integrator.
An alternate-convex-search (ACS) reference solver and KKT residual
oracles are included for verification.
"""

from .dataset import Dataset, NoiseSpec, inject_noise, load, save, split, synthesize
from .regularizers import SpRegularizer, implicit_loss, region, weight, weight_grads
from .numerics import IvpSpec, IvpResult, integrate, pinv_solve
from .acs import (
    AcsConfig,
    ModelKind,
    PartialOptimum,
    acs_grid_path,
    acs_solve,
    implicit_stationarity,
    weighted_fit,
)
from .path import AgePath, CriticalEvent, TraceConfig, best_on_path, evaluate_path, trace_path

__version__ = "0.1.0"

__all__ = [
    "AcsConfig",
    "AgePath",
    "CriticalEvent",
    "Dataset",
    "IvpResult",
    "IvpSpec",
    "ModelKind",
    "NoiseSpec",
    "PartialOptimum",
    "SpRegularizer",
    "TraceConfig",
    "acs_grid_path",
    "acs_solve",
    "best_on_path",
    "evaluate_path",
    "implicit_loss",
    "implicit_stationarity",
    "inject_noise",
    "integrate",
    "load",
    "pinv_solve",
    "region",
    "save",
    "split",
    "synthesize",
    "trace_path",
    "weight",
    "weight_grads",
]
