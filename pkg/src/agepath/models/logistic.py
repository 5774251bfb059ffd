"""Logistic-regression plugin: smooth losses, full (w, b) ODE.

Objective 1/2 ||w||^2 + sum_i v_i l_i with per-sample loss
l_i = C ln(1 + exp(-y_i (X_i w + b))).  With z_i = (x_i, 1), margin
m_i = y_i (X_i w + b), s_i = sigma(m_i) = exp(-l_i / C):

    l'  = dl/dm = C y (s - 1)        (gradient factor)
    l'' = C s (1 - s)                (curvature, y^2 = 1)

Stationarity F = (w, 0) + sum_i v_i l'_i z_i = 0 gives the segment ODE
d(w,b)/dlam = -J^+ J_lam with

    J      = blockdiag(I_d, 0) + sum_i [v_i l''_i + (dv/dl)_i l'_i^2] z_i z_i'
    J_lam  = sum_i (dv/dlam)_i l'_i z_i.

The loss is smooth, so the only segment boundaries are sample-region
changes of the self-paced weight rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import regularizers as R
from ..dataset import Dataset
from ..numerics import pinv_solve
from .base import LogitHyper, ModelKind

__all__ = ["LogitState", "LogitPlugin", "logit_rhs", "logit_kkt_residual"]


@dataclass
class LogitState:
    w: np.ndarray
    b: float
    losses: np.ndarray
    labels: np.ndarray  # per-sample region label 'E'/'M'/'D'


class LogitPlugin:
    model = ModelKind.LOGISTIC

    def __init__(self, ds: Dataset, hyper: LogitHyper, reg: R.SpRegularizer):
        if ds.task != "classification":
            raise ValueError("logistic regression requires a classification dataset")
        self.ds = ds
        self.hyper = hyper
        self.reg = reg
        self.Z = np.hstack([ds.features, np.ones((ds.n, 1))])

    # -- state construction -------------------------------------------------

    def _losses(self, w: np.ndarray, b: float) -> np.ndarray:
        m = self.ds.targets * (self.ds.features @ w + b)
        return self.hyper.C * np.logaddexp(0.0, -m)

    def state_from_params(self, params: np.ndarray, lam: float) -> LogitState:
        w, b = np.asarray(params[:-1], dtype=float).copy(), float(params[-1])
        losses = self._losses(w, b)
        return LogitState(w, b, losses, R.regions(self.reg, losses, lam))

    def params_from_state(self, state: LogitState) -> np.ndarray:
        return np.concatenate([state.w, [state.b]])

    def losses(self, state: LogitState) -> np.ndarray:
        return state.losses

    def weights(self, state: LogitState, lam: float) -> np.ndarray:
        return R.weights(self.reg, state.losses, lam)

    def partition_snapshot(self, state: LogitState) -> dict[str, tuple[int, ...]]:
        snap = {lab: tuple(int(i) for i in np.flatnonzero(state.labels == lab))
                for lab in ("E", "M", "D")}
        return {k: v for k, v in snap.items() if v}

    def param_names(self) -> list[str]:
        return [f"w_{j}" for j in range(self.ds.d)] + ["b"]

    # -- ODE vector mapping -------------------------------------------------

    def pack(self, state: LogitState) -> np.ndarray:
        return np.concatenate([state.w, [state.b]])

    def pack_index_map(self, state: LogitState) -> list[int]:
        return list(range(self.ds.d + 1))

    def unpack(self, state: LogitState, vec: np.ndarray, lam: float) -> LogitState:
        w, b = vec[:-1].copy(), float(vec[-1])
        return LogitState(w, b, self._losses(w, b), state.labels)

    # -- dynamics -----------------------------------------------------------

    def _loss_derivs(self, state: LogitState) -> tuple[np.ndarray, np.ndarray]:
        C, y = self.hyper.C, self.ds.targets
        s = np.exp(-state.losses / C)  # = sigma(margin)
        return C * y * (s - 1.0), C * s * (1.0 - s)

    def rhs(self, lam: float, vec: np.ndarray, state: LogitState) -> np.ndarray:
        st = self.unpack(state, vec, lam)
        d = self.ds.d
        v, dvdl, dvdlam = R.weights_and_grads(self.reg, st.losses, lam)
        lp, lpp = self._loss_derivs(st)
        coef = v * lpp + dvdl * lp * lp
        J = (self.Z * coef[:, None]).T @ self.Z
        J[:d, :d] += np.eye(d)
        jlam = self.Z.T @ (dvdlam * lp)
        return -pinv_solve(J, jlam)

    # -- monitors and repartition -------------------------------------------

    def monitor_specs(self, state: LogitState) -> list[tuple[str, int, str, str]]:
        fam = self.reg.family
        specs: list[tuple[str, int, str, str]] = []
        for i, lab in enumerate(state.labels):
            if lab == "E":
                specs.append(("lower", int(i), "E", "M" if fam == "mixture" else "D"))
            elif lab == "M":
                specs.append(("lower", int(i), "M", "E"))
                specs.append(("upper", int(i), "M", "D"))
            else:
                if fam == "mixture":
                    specs.append(("upper", int(i), "D", "M"))
                else:
                    specs.append(("lower", int(i), "D", "E"))
        return specs

    def monitors(self, lam: float, vec: np.ndarray, state: LogitState,
                 specs: list[tuple[str, int, str, str]]) -> np.ndarray:
        st = self.unpack(state, vec, lam)
        idx, is_lower = self._compiled_specs(specs)
        thr = np.where(is_lower, self.reg.lower_threshold(lam),
                       self.reg.upper_threshold(lam))
        return st.losses[idx] - thr

    def _compiled_specs(self, specs) -> tuple[np.ndarray, np.ndarray]:
        cached = getattr(self, "_spec_cache", None)
        if cached is None or cached[0] is not specs:
            idx = np.array([i for _, i, _, _ in specs], dtype=int)
            is_lower = np.array([k == "lower" for k, _, _, _ in specs])
            self._spec_cache = (specs, idx, is_lower)
            cached = self._spec_cache
        return cached[1], cached[2]

    def repartition(self, state: LogitState, lam: float,
                    crossed: list[tuple[str, int, str, str]]) -> tuple[LogitState, list]:
        labels = state.labels.copy()
        violators = []
        for _, i, src, dst in crossed:
            if labels[i] == src:
                labels[i] = dst
                violators.append((i, src, dst))
        return LogitState(state.w, state.b, state.losses, labels), violators

    # -- oracles ------------------------------------------------------------

    def kkt_residual(self, state: LogitState, lam: float) -> float:
        v = R.weights(self.reg, state.losses, lam)
        lp, _ = self._loss_derivs(state)
        grad = np.concatenate([state.w + self.ds.features.T @ (v * lp),
                               [float(v @ lp)]])
        return float(np.max(np.abs(grad)))

    def predict(self, state: LogitState, Xq: np.ndarray) -> np.ndarray:
        return np.where(self.decision(state, Xq) >= 0, 1.0, -1.0)

    def decision(self, state: LogitState, Xq: np.ndarray) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.ds.d:
            raise ValueError("query dimension mismatch")
        return Xq @ state.w + state.b

    def probability(self, state: LogitState, Xq: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.decision(state, Xq)))


# module-level operation aliases ------------------------------------------------


def logit_rhs(plugin: LogitPlugin, state: LogitState, lam: float) -> np.ndarray:
    return plugin.rhs(lam, plugin.pack(state), state)


def logit_kkt_residual(plugin: LogitPlugin, state: LogitState, lam: float) -> float:
    return plugin.kkt_residual(state, lam)
