"""Shared model vocabulary: model kinds, hyperparameters, losses, inner solvers.

The weighted inner solvers live here (not in the plugins) because both the
ACS reference solver and the path tracker's warm starts need them; they are
first-principles implementations with explicit stationarity tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..dataset import Dataset

__all__ = [
    "ModelKind",
    "SvmHyper",
    "LassoHyper",
    "LogitHyper",
    "kernel_matrix",
    "svm_losses",
    "lasso_losses",
    "logit_losses",
    "solve_weighted_svm",
    "solve_weighted_lasso",
    "solve_weighted_logit",
]


class ModelKind(str, Enum):
    SVM = "svm"
    LASSO = "lasso"
    LOGISTIC = "logistic"


@dataclass
class SvmHyper:
    C: float = 1.0
    kernel: str = "linear"  # "linear" | "gaussian"
    kernel_gamma: float | None = None  # required for gaussian
    K: np.ndarray | None = field(default=None, repr=False)  # cached kernel matrix

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.kernel not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "gaussian" and not (self.kernel_gamma and self.kernel_gamma > 0):
            raise ValueError("gaussian kernel requires kernel_gamma > 0")


@dataclass
class LassoHyper:
    alpha: float = 0.1

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class LogitHyper:
    C: float = 1.0

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")


# ---------------------------------------------------------------------------
# kernels and losses


def kernel_matrix(ds: Dataset, hyper: SvmHyper) -> np.ndarray:
    """n x n Gram matrix; gaussian K_ij = exp(-gamma * ||x_i - x_j||^2)."""
    X = ds.features
    if hyper.kernel == "linear":
        return X @ X.T
    sq = np.sum(X * X, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
    return np.exp(-hyper.kernel_gamma * d2)


def ensure_kernel(ds: Dataset, hyper: SvmHyper) -> np.ndarray:
    if hyper.K is None:
        hyper.K = kernel_matrix(ds, hyper)
    return hyper.K


def svm_margins(ds: Dataset, hyper: SvmHyper, alpha: np.ndarray, b: float) -> np.ndarray:
    """Margin slacks g_i = 1 - y_i * (sum_j alpha_j y_j K_ij + b)."""
    K = ensure_kernel(ds, hyper)
    return 1.0 - ds.targets * (K @ (alpha * ds.targets) + b)


def svm_losses(ds: Dataset, hyper: SvmHyper, alpha: np.ndarray, b: float) -> np.ndarray:
    return hyper.C * np.maximum(0.0, svm_margins(ds, hyper, alpha, b))


def lasso_losses(ds: Dataset, w: np.ndarray) -> np.ndarray:
    r = ds.features @ w - ds.targets
    return r * r / (2.0 * ds.n)


def logit_losses(ds: Dataset, hyper: LogitHyper, w: np.ndarray, b: float) -> np.ndarray:
    m = ds.targets * (ds.features @ w + b)
    return hyper.C * np.logaddexp(0.0, -m)


# ---------------------------------------------------------------------------
# weighted SVM dual (SMO, most-violating pair)


def solve_weighted_svm(
    ds: Dataset,
    v: np.ndarray,
    hyper: SvmHyper,
    warm: tuple[np.ndarray, float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, float, int, bool]:
    """Maximize the weighted SVM dual: min 1/2 a'Qa - 1'a, 0<=a_i<=C*v_i, y'a=0.

    Pairwise coordinate updates on the most-violating pair.  Returns
    (alpha, b, iterations, converged).
    """
    y = ds.targets
    K = ensure_kernel(ds, hyper)
    U = hyper.C * np.asarray(v, dtype=float)
    n = ds.n
    if warm is not None:
        alpha = np.clip(np.asarray(warm[0], dtype=float).copy(), 0.0, U)
        # repair the equality constraint if clipping broke it
        alpha = _repair_equality(alpha, y, U)
    else:
        alpha = np.zeros(n)
    if np.all(U <= 0):
        b = 1.0 if np.sum(y > 0) >= np.sum(y < 0) else -1.0
        return np.zeros(n), b, 0, True

    d = K @ (alpha * y)  # decision values without intercept
    r = y - d  # the b making sample i sit exactly on the margin
    eps = 1e-12
    it = 0
    for it in range(1, max_iter + 1):
        can_inc = alpha < U - eps
        can_dec = alpha > eps
        up = (can_inc & (y > 0)) | (can_dec & (y < 0))  # b >= r_i
        dn = (can_dec & (y > 0)) | (can_inc & (y < 0))  # b <= r_i
        if not (np.any(up) and np.any(dn)):
            break
        i = int(np.flatnonzero(up)[np.argmax(r[up])])
        j = int(np.flatnonzero(dn)[np.argmin(r[dn])])
        gap = r[i] - r[j]
        if gap <= tol:
            break
        # direction alpha_i += y_i t, alpha_j -= y_j t keeps y'alpha fixed
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t_lo, t_hi = _pair_bounds(alpha, U, y, i, j)
        t = gap / eta if eta > 1e-14 else t_hi
        t = min(max(t, t_lo), t_hi)
        if t <= 0:
            break
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        d += (K[:, i] - K[:, j]) * t
        r = y - d
    # intercept from the final feasibility interval
    can_inc = alpha < U - eps
    can_dec = alpha > eps
    up = (can_inc & (y > 0)) | (can_dec & (y < 0))
    dn = (can_dec & (y > 0)) | (can_inc & (y < 0))
    if np.any(up) and np.any(dn):
        b = 0.5 * (np.max(r[up]) + np.min(r[dn]))
    elif np.any(up):
        b = float(np.max(r[up]))
    elif np.any(dn):
        b = float(np.min(r[dn]))
    else:
        b = 1.0 if np.sum(y > 0) >= np.sum(y < 0) else -1.0
    converged = it < max_iter
    return alpha, float(b), it, converged


def _pair_bounds(alpha, U, y, i, j) -> tuple[float, float]:
    # feasible t range for alpha_i += y_i t, alpha_j -= y_j t
    if y[i] > 0:
        lo_i, hi_i = -alpha[i], U[i] - alpha[i]
    else:
        lo_i, hi_i = alpha[i] - U[i], alpha[i]
    if y[j] > 0:
        lo_j, hi_j = alpha[j] - U[j], alpha[j]
    else:
        lo_j, hi_j = -alpha[j], U[j] - alpha[j]
    return max(lo_i, lo_j), min(hi_i, hi_j)


def _repair_equality(alpha: np.ndarray, y: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Shift alpha minimally so y'alpha = 0 while staying inside [0, U]."""
    s = float(alpha @ y)
    for _ in range(alpha.size):
        if abs(s) < 1e-14:
            break
        if s > 0:
            cand = np.flatnonzero((y > 0) & (alpha > 0)) if np.any((y > 0) & (alpha > 0)) else \
                np.flatnonzero((y < 0) & (alpha < U))
        else:
            cand = np.flatnonzero((y < 0) & (alpha > 0)) if np.any((y < 0) & (alpha > 0)) else \
                np.flatnonzero((y > 0) & (alpha < U))
        if cand.size == 0:
            break
        i = int(cand[0])
        if y[i] * s > 0:
            step = min(abs(s), alpha[i])
            alpha[i] -= step
        else:
            step = min(abs(s), U[i] - alpha[i])
            alpha[i] += step
        s = float(alpha @ y)
    return alpha


# ---------------------------------------------------------------------------
# weighted Lasso (cyclic coordinate descent with soft-thresholding)


def solve_weighted_lasso(
    ds: Dataset,
    v: np.ndarray,
    hyper: LassoHyper,
    warm: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, int, bool]:
    """Minimize (1/2n) sum_i v_i (X_i w - y_i)^2 + alpha ||w||_1.

    Returns (w, sweeps, converged); convergence is a KKT stationarity check.
    """
    X, y, n = ds.features, ds.targets, ds.n
    v = np.asarray(v, dtype=float)
    a = hyper.alpha
    w = np.zeros(ds.d) if warm is None else np.asarray(warm, dtype=float).copy()
    col_sq = (v[:, None] * X * X).sum(axis=0) / n  # curvature per coordinate
    r = X @ w - y
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        delta = 0.0
        for j in range(ds.d):
            if col_sq[j] <= 0.0:
                if w[j] != 0.0:
                    r -= X[:, j] * w[j]
                    delta = max(delta, abs(w[j]))
                    w[j] = 0.0
                continue
            rho = w[j] * col_sq[j] - (v * r * X[:, j]).sum() / n
            wj = np.sign(rho) * max(abs(rho) - a, 0.0) / col_sq[j]
            if wj != w[j]:
                r += X[:, j] * (wj - w[j])
                delta = max(delta, abs(wj - w[j]))
                w[j] = wj
        if delta <= 0.1 * tol or _lasso_stationarity(X, y, v, w, a, n) <= tol:
            return w, sweeps, True
    return w, sweeps, False


def _lasso_stationarity(X, y, v, w, a, n) -> float:
    g = X.T @ (v * (X @ w - y)) / n
    res = 0.0
    for j in range(w.size):
        if w[j] != 0.0:
            res = max(res, abs(g[j] + a * np.sign(w[j])))
        else:
            res = max(res, max(0.0, abs(g[j]) - a))
    return res


# ---------------------------------------------------------------------------
# weighted logistic regression (damped Newton)


def solve_weighted_logit(
    ds: Dataset,
    v: np.ndarray,
    hyper: LogitHyper,
    warm: tuple[np.ndarray, float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[np.ndarray, float, int, bool]:
    """Minimize 1/2 ||w||^2 + sum_i v_i * C * log(1 + exp(-y_i (X_i w + b))).

    Damped Newton with step halving.  With all-zero weights returns (0, 0).
    Returns (w, b, iterations, converged).
    """
    X, y, n, d = ds.features, ds.targets, ds.n, ds.d
    v = np.asarray(v, dtype=float)
    C = hyper.C
    if np.all(v <= 0):
        return np.zeros(d), 0.0, 0, True
    if warm is not None:
        w, b = np.asarray(warm[0], dtype=float).copy(), float(warm[1])
    else:
        w, b = np.zeros(d), 0.0

    def objective(w, b):
        m = y * (X @ w + b)
        return 0.5 * w @ w + C * float(v @ np.logaddexp(0.0, -m))

    Z = np.hstack([X, np.ones((n, 1))])
    it = 0
    obj = objective(w, b)
    for it in range(1, max_iter + 1):
        m = y * (X @ w + b)
        s = 1.0 / (1.0 + np.exp(-m))  # sigma(m) = exp(-loss/C)
        gl = C * y * (s - 1.0)  # d loss_i / d margin-argument
        grad = np.concatenate([w + X.T @ (v * gl), [float(v @ gl)]])
        if np.max(np.abs(grad)) <= tol:
            return w, b, it - 1, True
        curv = v * C * s * (1.0 - s)
        H = (Z * curv[:, None]).T @ Z
        H[:d, :d] += np.eye(d)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            w2, b2 = w - t * step[:d], b - t * step[d]
            obj2 = objective(w2, b2)
            if obj2 <= obj + 1e-14 * (1.0 + abs(obj)):
                break
            t *= 0.5
        w, b, obj = w2, b2, obj2
    m = y * (X @ w + b)
    s = 1.0 / (1.0 + np.exp(-m))
    gl = C * y * (s - 1.0)
    grad = np.concatenate([w + X.T @ (v * gl), [float(v @ gl)]])
    return w, b, it, bool(np.max(np.abs(grad)) <= tol)
