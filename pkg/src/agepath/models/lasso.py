"""Lasso plugin: squared-residual losses, active-set ODE over the age parameter.

Objective (1/2n) sum_i v_i (X_i w - y_i)^2 + a ||w||_1 with per-sample
loss l_i = (1/2n)(X_i w - y_i)^2.  Within a segment the active set A and
the sample regions are fixed and stationarity over the active block reads

    F(w_A, lam) = (1/n) X_A' (v(l, lam) * r) + a * sgn(w_A) = 0,

so dw_A/dlam = -J^+ dF/dlam with J = (1/n) X_A' Diag{v + 2 l dv/dl} X_A
and dF/dlam = (1/n) X_A' (r * dv/dlam); inactive coefficients stay zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import regularizers as R
from ..dataset import Dataset
from ..numerics import pinv_solve
from .base import LassoHyper, ModelKind

__all__ = ["LassoState", "LassoPlugin", "lasso_rhs", "lasso_kkt_residual"]


@dataclass
class LassoState:
    w: np.ndarray
    active: np.ndarray  # boolean mask over features
    signs: np.ndarray  # sign of each active coefficient (valid where active)
    r: np.ndarray  # residual X w - y
    losses: np.ndarray
    labels: np.ndarray  # per-sample region label 'E'/'M'/'D'


class LassoPlugin:
    model = ModelKind.LASSO

    def __init__(self, ds: Dataset, hyper: LassoHyper, reg: R.SpRegularizer):
        self.ds = ds
        self.hyper = hyper
        self.reg = reg

    # -- state construction -------------------------------------------------

    def state_from_params(self, params: np.ndarray, lam: float) -> LassoState:
        w = np.asarray(params, dtype=float).copy()
        r = self.ds.features @ w - self.ds.targets
        losses = r * r / (2.0 * self.ds.n)
        active = w != 0.0
        return LassoState(w, active, np.sign(w), r, losses,
                          R.regions(self.reg, losses, lam))

    def params_from_state(self, state: LassoState) -> np.ndarray:
        return state.w.copy()

    def losses(self, state: LassoState) -> np.ndarray:
        return state.losses

    def weights(self, state: LassoState, lam: float) -> np.ndarray:
        return R.weights(self.reg, state.losses, lam)

    def partition_snapshot(self, state: LassoState) -> dict[str, tuple[int, ...]]:
        snap = {lab: tuple(int(i) for i in np.flatnonzero(state.labels == lab))
                for lab in ("E", "M", "D")}
        snap = {k: v for k, v in snap.items() if v}
        snap["A"] = tuple(int(j) for j in np.flatnonzero(state.active))
        return snap

    def param_names(self) -> list[str]:
        return [f"w_{j}" for j in range(self.ds.d)]

    # -- ODE vector mapping -------------------------------------------------

    def pack(self, state: LassoState) -> np.ndarray:
        return state.w[state.active].copy()

    def pack_index_map(self, state: LassoState) -> list[int]:
        return [int(j) for j in np.flatnonzero(state.active)]

    def unpack(self, state: LassoState, vec: np.ndarray, lam: float) -> LassoState:
        w = np.zeros(self.ds.d)
        w[state.active] = vec
        r = self.ds.features @ w - self.ds.targets
        losses = r * r / (2.0 * self.ds.n)
        return LassoState(w, state.active, state.signs, r, losses, state.labels)

    # -- dynamics -----------------------------------------------------------

    def rhs(self, lam: float, vec: np.ndarray, state: LassoState) -> np.ndarray:
        if vec.size == 0:
            return np.zeros(0)
        st = self.unpack(state, vec, lam)
        XA = self.ds.features[:, state.active]
        n = self.ds.n
        v, dvdl, dvdlam = R.weights_and_grads(self.reg, st.losses, lam)
        coef = v + 2.0 * st.losses * dvdl  # d(v_i r_i)/dr_i, zero on D
        J = (XA * coef[:, None]).T @ XA / n
        jlam = XA.T @ (st.r * dvdlam) / n
        return -pinv_solve(J, jlam)

    # -- monitors and repartition -------------------------------------------

    def monitor_specs(self, state: LassoState) -> list[tuple[str, int, str, str]]:
        fam = self.reg.family
        specs: list[tuple[str, int, str, str]] = []
        for j in np.flatnonzero(state.active):
            specs.append(("w", int(j), "A", "I"))
        for j in np.flatnonzero(~state.active):
            specs.append(("subgrad", int(j), "I", "A"))
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

    def monitors(self, lam: float, vec: np.ndarray, state: LassoState,
                 specs: list[tuple[str, int, str, str]]) -> np.ndarray:
        st = self.unpack(state, vec, lam)
        v = R.weights(self.reg, st.losses, lam)
        corr = self.ds.features.T @ (v * st.r) / self.ds.n
        groups = self._compiled_specs(specs)
        out = np.empty(len(specs))
        out[groups["w_pos"]] = st.w[groups["w_idx"]]
        out[groups["sub_pos"]] = self.hyper.alpha - np.abs(corr[groups["sub_idx"]])
        out[groups["lo_pos"]] = st.losses[groups["lo_idx"]] - self.reg.lower_threshold(lam)
        out[groups["hi_pos"]] = st.losses[groups["hi_idx"]] - self.reg.upper_threshold(lam)
        return out

    def _compiled_specs(self, specs) -> dict[str, np.ndarray]:
        cached = getattr(self, "_spec_cache", None)
        if cached is None or cached[0] is not specs:
            groups = {}
            for name, kinds in (("w", ("w",)), ("sub", ("subgrad",)),
                                ("lo", ("lower",)), ("hi", ("upper",))):
                pos = [k for k, s in enumerate(specs) if s[0] in kinds]
                groups[f"{name}_pos"] = np.array(pos, dtype=int)
                groups[f"{name}_idx"] = np.array([specs[k][1] for k in pos], dtype=int)
            self._spec_cache = (specs, groups)
            cached = self._spec_cache
        return cached[1]

    def repartition(self, state: LassoState, lam: float,
                    crossed: list[tuple[str, int, str, str]]) -> tuple[LassoState, list]:
        active = state.active.copy()
        signs = state.signs.copy()
        labels = state.labels.copy()
        w = state.w.copy()
        v = R.weights(self.reg, state.losses, lam)
        corr = self.ds.features.T @ (v * state.r) / self.ds.n
        violators = []
        for kind, i, src, dst in crossed:
            if kind == "w" and active[i]:
                active[i] = False
                w[i] = 0.0
                violators.append((i, "A", "I"))
            elif kind == "subgrad" and not active[i]:
                active[i] = True
                w[i] = 0.0
                signs[i] = -np.sign(corr[i])  # stationarity fixes the entry sign
                violators.append((i, "I", "A"))
            elif kind in ("lower", "upper") and labels[i] == src:
                labels[i] = dst
                violators.append((i, src, dst))
        r = self.ds.features @ w - self.ds.targets
        losses = r * r / (2.0 * self.ds.n)
        return LassoState(w, active, signs, r, losses, labels), violators

    # -- oracles ------------------------------------------------------------

    def kkt_residual(self, state: LassoState, lam: float) -> float:
        """max over active stationarity and inactive subgradient excess."""
        v = R.weights(self.reg, state.losses, lam)
        g = self.ds.features.T @ (v * state.r) / self.ds.n
        a = self.hyper.alpha
        res = 0.0
        for j in range(self.ds.d):
            if state.active[j]:
                s = np.sign(state.w[j]) if state.w[j] != 0.0 else state.signs[j]
                res = max(res, abs(g[j] + a * s))
            else:
                res = max(res, max(0.0, abs(g[j]) - a))
        return res

    def inactive_subgradients(self, state: LassoState, lam: float) -> np.ndarray:
        """|correlation|/a over inactive features (bounded by 1 at optimality)."""
        v = R.weights(self.reg, state.losses, lam)
        g = self.ds.features.T @ (v * state.r) / self.ds.n
        return np.abs(g[~state.active]) / self.hyper.alpha

    def predict(self, state: LassoState, Xq: np.ndarray) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.ds.d:
            raise ValueError("query dimension mismatch")
        return Xq @ state.w


# module-level operation aliases ------------------------------------------------


def lasso_rhs(plugin: LassoPlugin, state: LassoState, lam: float) -> np.ndarray:
    return plugin.rhs(lam, plugin.pack(state), state)


def lasso_kkt_residual(plugin: LassoPlugin, state: LassoState, lam: float) -> float:
    return plugin.kkt_residual(state, lam)
