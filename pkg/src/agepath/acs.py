"""Alternate convex search (ACS): the reference solver for self-paced models.

ACS alternates a closed-form weight update v_i = v*(l_i(params), lam) with
a weighted convex fit of the model parameters until the parameter vector
stops moving.  Its fixed points are partial optima and serve as ground
truth for the path tracker.  A warm-started grid sweep doubles as the
baseline competitor and as the dense path oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import lsq_linear

from .dataset import Dataset
from . import regularizers as R
from .models.base import (
    LassoHyper,
    LogitHyper,
    ModelKind,
    SvmHyper,
    ensure_kernel,
    lasso_losses,
    logit_losses,
    solve_weighted_lasso,
    solve_weighted_logit,
    solve_weighted_svm,
    svm_losses,
    svm_margins,
)

__all__ = [
    "AcsConfig",
    "ModelKind",
    "PartialOptimum",
    "weighted_fit",
    "acs_solve",
    "acs_grid_path",
    "implicit_stationarity",
    "spl_objective",
    "model_losses",
    "kkt_residual_for",
]


KKT_POLISH_TOL = 1e-7  # residual at which a stalled alternation counts as converged
MIN_INNER_TOL = 1e-14  # floor for the inner-tolerance tightening


@dataclass
class AcsConfig:
    inner_tol: float = 1e-10
    outer_tol: float = 1e-8
    max_outer: int = 200
    max_inner: int = 100_000

    def __post_init__(self) -> None:
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class PartialOptimum:
    """A fixed point of ACS: params optimal given weights and vice versa."""

    params: np.ndarray  # lasso: w; svm/logistic: concat(primal/dual vector, [b])
    weights: np.ndarray
    lam: float
    outer_iters: int
    converged: bool = True
    inner_iters: int = 0


# ---------------------------------------------------------------------------
# dispatch helpers


def model_losses(model: ModelKind, ds: Dataset, params: np.ndarray, hyper) -> np.ndarray:
    if model == ModelKind.SVM:
        return svm_losses(ds, hyper, params[:-1], params[-1])
    if model == ModelKind.LASSO:
        return lasso_losses(ds, params)
    return logit_losses(ds, hyper, params[:-1], params[-1])


def _zero_params(model: ModelKind, ds: Dataset) -> np.ndarray:
    if model == ModelKind.SVM:
        return np.concatenate([np.zeros(ds.n), [0.0]])
    if model == ModelKind.LASSO:
        return np.zeros(ds.d)
    return np.zeros(ds.d + 1)


def unweighted_init(model: ModelKind, ds: Dataset, hyper,
                    cfg: AcsConfig | None = None) -> np.ndarray:
    """Unweighted (v = 1) fit, used to seed ACS on the data-fitting branch.

    Biconvex objectives admit degenerate partial optima (e.g. the SVM point
    that discards every misclassified sample from the zero model); seeding
    from the v=1 solution selects the branch that actually fits the data.
    """
    params, _, _ = weighted_fit(model, ds, np.ones(ds.n), hyper, cfg=cfg)
    return params


def weighted_fit(
    model: ModelKind,
    ds: Dataset,
    v: np.ndarray,
    hyper,
    warm: np.ndarray | None = None,
    cfg: AcsConfig | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Solve the v-weighted convex subproblem; returns (params, inner iters, converged)."""
    cfg = cfg or AcsConfig()
    v = np.asarray(v, dtype=float)
    if np.any((v < 0) | (v > 1)):
        raise ValueError("weights must lie in [0,1]")
    if model == ModelKind.SVM:
        w0 = (warm[:-1], warm[-1]) if warm is not None else None
        a, b, it, ok = solve_weighted_svm(ds, v, hyper, warm=w0,
                                          tol=cfg.inner_tol, max_iter=cfg.max_inner)
        return np.concatenate([a, [b]]), it, ok
    if model == ModelKind.LASSO:
        w, it, ok = solve_weighted_lasso(ds, v, hyper, warm=warm,
                                         tol=cfg.inner_tol, max_iter=cfg.max_inner)
        return w, it, ok
    w0 = (warm[:-1], warm[-1]) if warm is not None else None
    w, b, it, ok = solve_weighted_logit(ds, v, hyper, warm=w0,
                                        tol=cfg.inner_tol, max_iter=min(cfg.max_inner, 500))
    return np.concatenate([w, [b]]), it, ok


def spl_objective(model: ModelKind, ds: Dataset, params, v, lam: float, hyper,
                  reg: R.SpRegularizer) -> float:
    """The joint self-paced objective L(params, v) = R(params) + sum_i v_i l_i + f(v_i, lam)."""
    losses = model_losses(model, ds, params, hyper)
    if model == ModelKind.SVM:
        ay = params[:-1] * ds.targets
        model_term = 0.5 * float(ay @ (ensure_kernel(ds, hyper) @ ay))
    elif model == ModelKind.LASSO:
        # L1 term; the weighted quadratic is the data term below
        model_term = hyper.alpha * float(np.sum(np.abs(params)))
    else:
        model_term = 0.5 * float(params[:-1] @ params[:-1])
    return model_term + float(v @ losses) + float(np.sum(R.penalty(reg, v, lam)))


def acs_solve(
    model: ModelKind,
    ds: Dataset,
    lam: float,
    hyper,
    reg: R.SpRegularizer,
    cfg: AcsConfig | None = None,
    init: np.ndarray | None = None,
) -> PartialOptimum:
    """Algorithm: alternate weight update and weighted fit until params stall.

    Convergence: ||params_{k+1} - params_k||_inf <= outer_tol and the
    partial-optimum KKT residual is small; a stall with a large residual
    means the inner solver's precision is the bottleneck, so the inner
    tolerance is tightened and the alternation continues.  The returned
    weights are recomputed from the final params (exact fixed-point form).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    cfg = cfg or AcsConfig()
    params = _zero_params(model, ds) if init is None else np.asarray(init, dtype=float).copy()
    total_inner = 0
    converged = False
    it = 0
    inner_tol = cfg.inner_tol
    while True:
        for _ in range(cfg.max_outer):
            it += 1
            v = R.weights(reg, model_losses(model, ds, params, hyper), lam)
            new_params, inner, _ = weighted_fit(model, ds, v, hyper, warm=params,
                                                cfg=replace(cfg, inner_tol=inner_tol))
            total_inner += inner
            delta = float(np.max(np.abs(new_params - params)))
            params = new_params
            if delta <= cfg.outer_tol:
                converged = True
                break
        # a finite-precision inner solve caps how far the alternation can
        # contract; if the fixed point is not yet resolved, tighten and rerun
        if inner_tol <= MIN_INNER_TOL:
            break
        if converged and kkt_residual_for(model, ds, params, lam, hyper, reg) <= KKT_POLISH_TOL:
            break
        converged = False
        inner_tol = max(1e-2 * inner_tol, MIN_INNER_TOL)
    weights = R.weights(reg, model_losses(model, ds, params, hyper), lam)
    return PartialOptimum(params, weights, lam, it, converged, total_inner)


def acs_grid_path(
    model: ModelKind,
    ds: Dataset,
    lam_grid: np.ndarray,
    hyper,
    reg: R.SpRegularizer,
    cfg: AcsConfig | None = None,
    init: np.ndarray | None = None,
) -> list[PartialOptimum]:
    """Sequential ACS solves over an increasing lambda grid, warm-started."""
    lam_grid = np.asarray(lam_grid, dtype=float)
    if lam_grid.ndim != 1 or lam_grid.size == 0 or np.any(np.diff(lam_grid) <= 0) \
            or lam_grid[0] <= 0:
        raise ValueError("lam_grid must be strictly increasing and positive")
    out: list[PartialOptimum] = []
    warm = init
    for lam in lam_grid:
        po = acs_solve(model, ds, float(lam), hyper, reg, cfg, init=warm)
        out.append(po)
        warm = po.params
    return out


# ---------------------------------------------------------------------------
# implicit-objective stationarity (consistency oracle)


def implicit_stationarity(
    model: ModelKind,
    ds: Dataset,
    params: np.ndarray,
    lam: float,
    hyper,
    reg: R.SpRegularizer,
) -> float:
    """Norm of the minimum-norm (sub)gradient of the implicit objective G_lam.

    G_lam(params) = R(params) + sum_i F_lam(l_i(params)) where F_lam is the
    integral of the weight rule; by the chain rule dF_lam/dl = v*(l), so
    stationarity of G_lam coincides with the partial-optimum KKT system.
    """
    params = np.asarray(params, dtype=float)
    losses = model_losses(model, ds, params, hyper)
    v = R.weights(reg, losses, lam)
    if model == ModelKind.LASSO:
        return _lasso_implicit(ds, params, v, hyper)
    if model == ModelKind.LOGISTIC:
        return _logit_implicit(ds, params, v, hyper)
    return _svm_implicit(ds, params, v, hyper)


def _lasso_implicit(ds, w, v, hyper) -> float:
    g = ds.features.T @ (v * (ds.features @ w - ds.targets)) / ds.n
    res = 0.0
    for j in range(ds.d):
        if w[j] != 0.0:
            res = max(res, abs(g[j] + hyper.alpha * np.sign(w[j])))
        else:
            res = max(res, max(0.0, abs(g[j]) - hyper.alpha))
    return res


def _logit_implicit(ds, params, v, hyper) -> float:
    w, b = params[:-1], params[-1]
    m = ds.targets * (ds.features @ w + b)
    gl = hyper.C * ds.targets * (1.0 / (1.0 + np.exp(-m)) - 1.0)
    grad = np.concatenate([w + ds.features.T @ (v * gl), [float(v @ gl)]])
    return float(np.max(np.abs(grad)))


def _svm_implicit(ds, params, v, hyper) -> float:
    """Min-norm subgradient of the hinge-based implicit objective in the RKHS.

    The function part is w - C sum_i v_i t_i y_i phi_i with t_i in the hinge
    subdifferential ([0,1] at the kink, {1} on positive slack, {0} on
    negative); the intercept part is -C sum v_i t_i y_i.  Minimizing the
    joint squared norm over the free t's is a box-constrained least squares
    in the kernel metric.
    """
    alpha, b = params[:-1], params[-1]
    y = ds.targets
    K = ensure_kernel(ds, hyper)
    g = svm_margins(ds, hyper, alpha, b)
    C = hyper.C
    g_tol = 1e-8
    t = np.where(g > g_tol, 1.0, 0.0)
    free = np.abs(g) <= g_tol
    coef0 = alpha * y - C * v * t * y  # kernel coefficient of the subgradient
    bias0 = -C * float(np.sum(v * t * y))
    if not np.any(free):
        return float(np.sqrt(max(coef0 @ K @ coef0, 0.0) + bias0 * bias0))
    # factor K = L' L to express the RKHS norm as a Euclidean one
    evals, evecs = np.linalg.eigh(K)
    L = (evecs * np.sqrt(np.clip(evals, 0.0, None))).T
    idx = np.flatnonzero(free)
    cols = C * v[idx] * y[idx]
    A = np.vstack([L[:, idx] * cols, cols])  # last row: intercept gradient
    rhs = np.concatenate([L @ coef0, [bias0]])
    sol = lsq_linear(A, rhs, bounds=(0.0, 1.0), tol=1e-14)
    resid = A @ sol.x - rhs
    return float(np.linalg.norm(resid))


def kkt_residual_for(model: ModelKind, ds: Dataset, params: np.ndarray, lam: float,
                     hyper, reg: R.SpRegularizer) -> float:
    """Partial-optimum KKT residual for raw parameter vectors (plugin-free paths)."""
    from .models import make_plugin  # local import to avoid a cycle

    plugin = make_plugin(model, ds, hyper, reg)
    state = plugin.state_from_params(np.asarray(params, dtype=float), lam)
    return plugin.kkt_residual(state, lam)
