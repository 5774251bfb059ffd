"""Model plugins: kernel SVM, Lasso, logistic regression."""

from __future__ import annotations

from ..dataset import Dataset
from ..regularizers import SpRegularizer
from .base import (
    LassoHyper,
    LogitHyper,
    ModelKind,
    SvmHyper,
    kernel_matrix,
)
from .lasso import LassoPlugin, LassoState, lasso_kkt_residual, lasso_rhs
from .logistic import LogitPlugin, LogitState, logit_kkt_residual, logit_rhs
from .svm import SvmPlugin, SvmState, svm_kkt_residual, svm_partition, svm_rhs

__all__ = [
    "LassoHyper",
    "LassoPlugin",
    "LassoState",
    "LogitHyper",
    "LogitPlugin",
    "LogitState",
    "ModelKind",
    "SvmHyper",
    "SvmPlugin",
    "SvmState",
    "kernel_matrix",
    "lasso_kkt_residual",
    "lasso_rhs",
    "logit_kkt_residual",
    "logit_rhs",
    "make_plugin",
    "svm_kkt_residual",
    "svm_partition",
    "svm_rhs",
]


def make_plugin(model: ModelKind, ds: Dataset, hyper, reg: SpRegularizer):
    """Instantiate the plugin for a model kind over one dataset/regularizer."""
    model = ModelKind(model)
    if model == ModelKind.SVM:
        return SvmPlugin(ds, hyper, reg)
    if model == ModelKind.LASSO:
        return LassoPlugin(ds, hyper, reg)
    return LogitPlugin(ds, hyper, reg)
