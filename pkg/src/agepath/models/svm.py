"""Kernel SVM plugin: hinge losses, margin partition, dual-coefficient ODE.

Per-sample loss l_i = C * max(0, g_i) with margin slack
g_i = 1 - y_i (sum_j alpha_j y_j K_ij + b).  Easy samples split by the
sign of g into E_N (g<0, alpha=0), E_Z (g=0, alpha free in [0, C v]),
E_P (g>0, alpha pinned at C v); discarded samples have alpha=0; mixture
moderates M carry fractional weights with alpha = C v(l).

Within a fixed partition the KKT map in the free block x = (alpha_EZ,
alpha_B, b) (B = E_P for the linear family, M for mixture) is

    F1 = y' alpha                  (equality constraint)
    F2 = g_EZ                      (margin pinned at zero)
    F3 = alpha_B - C v(l_B)        (upper-bound pinning)

and the segment ODE is dx/dlam = -J_F^+ dF/dlam.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import regularizers as R
from ..dataset import Dataset
from ..numerics import pinv_solve
from .base import ModelKind, SvmHyper, ensure_kernel

__all__ = ["SvmState", "SvmPlugin", "svm_partition", "svm_rhs", "svm_kkt_residual"]

G_TOL = 1e-8  # |g| below this means "on the margin" (E_Z membership)

SETS = ("EN", "EZ", "EP", "M", "D")


@dataclass
class SvmState:
    alpha: np.ndarray
    b: float
    g: np.ndarray
    losses: np.ndarray
    part: dict[str, np.ndarray]  # disjoint index arrays over SETS


def svm_partition(g: np.ndarray, losses: np.ndarray, lam: float,
                  reg: R.SpRegularizer, g_tol: float = G_TOL) -> dict[str, np.ndarray]:
    """Partition samples into E_N/E_Z/E_P, M (mixture), D from margins and losses."""
    labels = R.regions(reg, losses, lam)
    e = labels == "E"
    part = {
        "EN": np.flatnonzero(e & (g < -g_tol)),
        "EZ": np.flatnonzero(e & (np.abs(g) <= g_tol)),
        "EP": np.flatnonzero(e & (g > g_tol)),
        "M": np.flatnonzero(labels == "M"),
        "D": np.flatnonzero(labels == "D"),
    }
    return part


class SvmPlugin:
    model = ModelKind.SVM

    def __init__(self, ds: Dataset, hyper: SvmHyper, reg: R.SpRegularizer):
        if ds.task != "classification":
            raise ValueError("SVM requires a classification dataset")
        self.ds = ds
        self.hyper = hyper
        self.reg = reg
        self.K = ensure_kernel(ds, hyper)
        self.Q = self.K * np.outer(ds.targets, ds.targets)

    # -- state construction -------------------------------------------------

    def _derived(self, alpha: np.ndarray, b: float) -> tuple[np.ndarray, np.ndarray]:
        y = self.ds.targets
        nz = np.flatnonzero(alpha)
        if nz.size < self.ds.n // 4:
            # the dual vector is usually sparse; restrict the kernel matvec
            # to support columns
            ka = self.K[:, nz] @ (alpha[nz] * y[nz]) if nz.size else np.zeros(self.ds.n)
        else:
            ka = self.K @ (alpha * y)
        g = 1.0 - y * (ka + b)
        return g, self.hyper.C * np.maximum(0.0, g)

    def state_from_params(self, params: np.ndarray, lam: float) -> SvmState:
        alpha, b = np.asarray(params[:-1], dtype=float).copy(), float(params[-1])
        g, losses = self._derived(alpha, b)
        return SvmState(alpha, b, g, losses, svm_partition(g, losses, lam, self.reg))

    def params_from_state(self, state: SvmState) -> np.ndarray:
        return np.concatenate([state.alpha, [state.b]])

    def losses(self, state: SvmState) -> np.ndarray:
        return state.losses

    def weights(self, state: SvmState, lam: float) -> np.ndarray:
        return R.weights(self.reg, state.losses, lam)

    def partition_snapshot(self, state: SvmState) -> dict[str, tuple[int, ...]]:
        return {k: tuple(int(i) for i in v) for k, v in state.part.items() if v.size}

    def param_names(self) -> list[str]:
        return [f"alpha_{i}" for i in range(self.ds.n)] + ["b"]

    # -- ODE vector mapping -------------------------------------------------

    def _free_block(self, state: SvmState) -> tuple[np.ndarray, np.ndarray]:
        z = state.part["EZ"]
        bk = state.part["M"] if self.reg.family == "mixture" else state.part["EP"]
        return z, bk

    def pack(self, state: SvmState) -> np.ndarray:
        z, bk = self._free_block(state)
        return np.concatenate([state.alpha[z], state.alpha[bk], [state.b]])

    def pack_index_map(self, state: SvmState) -> list[int]:
        """Position of each packed component inside the full (alpha, b) vector."""
        z, bk = self._free_block(state)
        return [int(i) for i in z] + [int(i) for i in bk] + [self.ds.n]

    def unpack(self, state: SvmState, vec: np.ndarray, lam: float) -> SvmState:
        z, bk = self._free_block(state)
        alpha = np.zeros(self.ds.n)
        nz = z.size
        alpha[z] = vec[:nz]
        alpha[bk] = vec[nz:nz + bk.size]
        if self.reg.family == "mixture":
            alpha[state.part["EP"]] = self.hyper.C
        else:
            # linear family: E_P alphas are pinned at C*v and live in the ODE block
            pass
        b = float(vec[-1])
        g, losses = self._derived(alpha, b)
        if self.reg.family == "linear":
            ep = state.part["EP"]
            # keep the pinned identity alpha = C v(l) exact against integration drift
            alpha[ep] = np.clip(alpha[ep], 0.0, self.hyper.C)
        return SvmState(alpha, b, g, losses, state.part)

    # -- dynamics -----------------------------------------------------------

    def _segment_cache(self, state: SvmState) -> dict:
        """Kernel blocks fixed for a partition segment, keyed on state identity."""
        cached = getattr(self, "_seg_cache", None)
        if cached is None or cached[0] is not state:
            z, bk = self._free_block(state)
            free = np.concatenate([z, bk]).astype(int)
            ep = (state.part["EP"] if self.reg.family == "mixture"
                  else np.empty(0, dtype=int))
            sup = np.concatenate([free, ep])
            y = self.ds.targets
            blocks = {
                "y_z": y[z], "y_bk": y[bk], "y_sup": y[sup],
                "a_pin": np.full(ep.size, self.hyper.C, dtype=float),
                "K_b_sup": self.K[np.ix_(bk, sup)],
                "Q_zf": self.Q[np.ix_(z, free)],
                "Q_bf": self.Q[np.ix_(bk, free)],
            }
            self._seg_cache = (state, blocks)
            cached = self._seg_cache
        return cached[1]

    def rhs(self, lam: float, vec: np.ndarray, state: SvmState) -> np.ndarray:
        z, bk = self._free_block(state)
        nz, nb = z.size, bk.size
        if nz + nb == 0:
            return np.zeros(vec.size)
        C = self.hyper.C
        blk = self._segment_cache(state)
        dim = nz + nb + 1
        J = np.zeros((dim, dim))
        J[0, :nz] = blk["y_z"]
        J[0, nz:nz + nb] = blk["y_bk"]
        if nz:
            J[1:1 + nz, :nz + nb] = -blk["Q_zf"]
            J[1:1 + nz, -1] = -blk["y_z"]
        jlam = np.zeros(dim)
        if nb:
            # losses on the pinned block, from support columns only
            a_sup = np.concatenate([vec[:nz + nb], blk["a_pin"]])
            g_bk = 1.0 - blk["y_bk"] * (blk["K_b_sup"] @ (a_sup * blk["y_sup"])
                                        + float(vec[-1]))
            _, dvdl, dvdlam = R.weights_and_grads(
                self.reg, C * np.maximum(0.0, g_bk), lam)
            rows = slice(1 + nz, 1 + nz + nb)
            J[rows, :nz + nb] = (C * C * dvdl)[:, None] * blk["Q_bf"]
            J[rows, nz:nz + nb] += np.eye(nb)
            J[rows, -1] = C * C * dvdl * blk["y_bk"]
            jlam[1 + nz:1 + nz + nb] = -C * dvdlam
        return -pinv_solve(J, jlam)

    # -- monitors and repartition -------------------------------------------

    def monitor_specs(self, state: SvmState) -> list[tuple[str, int, str, str]]:
        """(quantity, sample, from-set, to-set) per monitor, fixed for a segment."""
        fam = self.reg.family
        specs: list[tuple[str, int, str, str]] = []
        for i in state.part["EN"]:
            specs.append(("g", int(i), "EN", "EZ"))
        for i in state.part["EZ"]:
            specs.append(("alpha", int(i), "EZ", "EN"))
            specs.append(("box", int(i), "EZ", "EP"))
        for i in state.part["EP"]:
            specs.append(("g", int(i), "EP", "EZ"))
            specs.append(("lower", int(i), "EP", "M" if fam == "mixture" else "D"))
        for i in state.part["M"]:
            specs.append(("lower", int(i), "M", "EP"))
            specs.append(("upper", int(i), "M", "D"))
        for i in state.part["D"]:
            if fam == "mixture":
                specs.append(("upper", int(i), "D", "M"))
            else:
                specs.append(("lower", int(i), "D", "EP"))
        return specs

    def monitors(self, lam: float, vec: np.ndarray, state: SvmState,
                 specs: list[tuple[str, int, str, str]]) -> np.ndarray:
        st = self.unpack(state, vec, lam)
        v = R.weights(self.reg, st.losses, lam)
        C = self.hyper.C
        groups = self._compiled_specs(specs)
        out = np.empty(len(specs))
        out[groups["g_pos"]] = st.g[groups["g_idx"]]
        out[groups["a_pos"]] = st.alpha[groups["a_idx"]]
        bi = groups["b_idx"]
        out[groups["b_pos"]] = C * v[bi] - st.alpha[bi]
        out[groups["lo_pos"]] = st.losses[groups["lo_idx"]] - self.reg.lower_threshold(lam)
        out[groups["hi_pos"]] = st.losses[groups["hi_idx"]] - self.reg.upper_threshold(lam)
        return out

    def _compiled_specs(self, specs) -> dict[str, np.ndarray]:
        cached = getattr(self, "_spec_cache", None)
        if cached is None or cached[0] is not specs:
            groups = {}
            for name, kind in (("g", "g"), ("a", "alpha"), ("b", "box"),
                               ("lo", "lower"), ("hi", "upper")):
                pos = [k for k, s in enumerate(specs) if s[0] == kind]
                groups[f"{name}_pos"] = np.array(pos, dtype=int)
                groups[f"{name}_idx"] = np.array([specs[k][1] for k in pos], dtype=int)
            self._spec_cache = (specs, groups)
            cached = self._spec_cache
        return cached[1]

    def repartition(self, state: SvmState, lam: float,
                    crossed: list[tuple[str, int, str, str]]) -> tuple[SvmState, list]:
        """Move crossed samples between sets; pinned components are reset exactly."""
        part = {k: set(int(i) for i in idx) for k, idx in state.part.items()}
        violators = []
        for _, i, src, dst in crossed:
            if i in part[src]:
                part[src].discard(i)
                part[dst].add(i)
                violators.append((i, src, dst))
        newpart = {k: np.array(sorted(s), dtype=int) for k, s in part.items()}
        alpha = state.alpha.copy()
        v = R.weights(self.reg, state.losses, lam)
        C = self.hyper.C
        for i, src, dst in violators:
            if dst in ("EN", "D"):
                alpha[i] = 0.0
            elif dst in ("EP", "M"):
                alpha[i] = C if (dst == "EP" and self.reg.family == "mixture") else C * v[i]
            # dst == "EZ": alpha is free and continuous, leave as is
        g, losses = self._derived(alpha, state.b)
        return SvmState(alpha, state.b, g, losses, newpart), violators

    # -- oracles ------------------------------------------------------------

    def kkt_residual(self, state: SvmState, lam: float, g_tol: float = 1e-6) -> float:
        """Partition-free partial-optimum residual from (alpha, b) alone.

        max of |y'alpha|, |alpha| where g<0, |alpha - C v| where g>0, and
        box violation of [0, C v] on the margin; v = v*(l, lam) throughout.
        The margin band here is wider than the E_Z membership tolerance so
        that the boundary overshoot left by event bracketing (an O(1e-8)
        slack in lambda) cannot flip a pinning condition spuriously.
        """
        y = self.ds.targets
        alpha, g, losses = state.alpha, state.g, state.losses
        v = R.weights(self.reg, losses, lam)
        C = self.hyper.C
        res = abs(float(alpha @ y))
        neg = g < -g_tol
        pos = g > g_tol
        mid = ~neg & ~pos
        if np.any(neg):
            res = max(res, float(np.max(np.abs(alpha[neg]))))
        if np.any(pos):
            res = max(res, float(np.max(np.abs(alpha[pos] - C * v[pos]))))
        if np.any(mid):
            res = max(res, float(np.max(np.maximum(-alpha[mid], 0.0))))
            res = max(res, float(np.max(np.maximum(alpha[mid] - C * v[mid], 0.0))))
        return res

    def predict(self, state: SvmState, Xq: np.ndarray) -> np.ndarray:
        d = self.decision(state, Xq)
        return np.where(d >= 0, 1.0, -1.0)

    def decision(self, state: SvmState, Xq: np.ndarray) -> np.ndarray:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.ds.d:
            raise ValueError("query dimension mismatch")
        X = self.ds.features
        if self.hyper.kernel == "linear":
            Kq = Xq @ X.T
        else:
            d2 = np.maximum(
                np.sum(Xq * Xq, axis=1)[:, None] + np.sum(X * X, axis=1)[None, :]
                - 2.0 * (Xq @ X.T), 0.0)
            Kq = np.exp(-self.hyper.kernel_gamma * d2)
        return Kq @ (state.alpha * self.ds.targets) + state.b


# module-level operation aliases ------------------------------------------------


def svm_rhs(plugin: SvmPlugin, state: SvmState, lam: float) -> np.ndarray:
    return plugin.rhs(lam, plugin.pack(state), state)


def svm_kkt_residual(plugin: SvmPlugin, state: SvmState, lam: float) -> float:
    return plugin.kkt_residual(state, lam)
