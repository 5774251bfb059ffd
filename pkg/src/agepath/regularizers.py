"""Self-paced regularizers: closed-form weights, regions, derivatives.

Each family defines a penalty f(v, lam) on a sample weight v in [0,1];
the optimal weight for a sample with loss l is argmin_v v*l + f(v, lam).
Closed forms:

    hard     f = -lam*v              v* = 1 if l < lam else 0
    linear   f = lam*(v^2/2 - v)     v* = 1 - l/lam if l < lam else 0
    mixture  f = gamma^2/(v + gamma/lam)
             v* = 1                       if l <  t1
                  gamma*(1/sqrt(l)-1/lam) if t1 <= l <= lam^2
                  0                       if l >  lam^2
             with t1 = (lam*gamma/(lam+gamma))^2.

The mixture form follows from stationarity of v*l + gamma^2/(v+gamma/lam):
d/dv = l - gamma^2/(v+gamma/lam)^2 = 0  =>  v = gamma/sqrt(l) - gamma/lam,
clamped to [0,1]; it is validated against a grid/ternary-search oracle in
the tests.  Region labels: E (easy, full weight), M (moderate, fractional
weight, mixture only), D (discarded).  Ties resolve as: linear/hard
l >= lam -> D; mixture boundaries are inclusive into M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpRegularizer",
    "weight",
    "region",
    "weight_grads",
    "implicit_loss",
    "penalty",
    "weights",
    "regions",
    "weights_and_grads",
    "implicit_losses",
]

FAMILIES = ("hard", "linear", "mixture")


@dataclass(frozen=True)
class SpRegularizer:
    family: str
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "mixture":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("mixture family requires gamma > 0")
        elif self.gamma is not None:
            raise ValueError(f"gamma is only valid for the mixture family")

    def lower_threshold(self, lam: float) -> float:
        """Loss below which v*=1.  (lam*gamma/(lam+gamma))^2 for mixture, lam otherwise."""
        if self.family == "mixture":
            return (lam * self.gamma / (lam + self.gamma)) ** 2
        return lam

    def upper_threshold(self, lam: float) -> float:
        """Loss above which v*=0.  lam^2 for mixture, lam otherwise."""
        if self.family == "mixture":
            return lam * lam
        return lam


def _check(loss, lam: float) -> None:
    if not np.all(np.isfinite(loss)) or np.any(np.asarray(loss) < 0):
        raise ValueError(f"loss must be finite and nonnegative, got {loss}")
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lam must be positive, got {lam}")


def penalty(reg: SpRegularizer, v, lam: float):
    """The regularizer value f(v, lam) itself (used by ACS objective bookkeeping)."""
    v = np.asarray(v, dtype=float)
    if reg.family == "hard":
        return -lam * v
    if reg.family == "linear":
        return lam * (v * v / 2.0 - v)
    return reg.gamma**2 / (v + reg.gamma / lam)


# ---------------------------------------------------------------------------
# vectorized kernels (scalar public ops wrap these)


def weights(reg: SpRegularizer, losses, lam: float) -> np.ndarray:
    _check(losses, lam)
    l = np.asarray(losses, dtype=float)
    if reg.family == "hard":
        return np.where(l < lam, 1.0, 0.0)
    if reg.family == "linear":
        return np.where(l < lam, 1.0 - l / lam, 0.0)
    t1 = reg.lower_threshold(lam)
    t2 = reg.upper_threshold(lam)
    with np.errstate(divide="ignore"):
        mid = reg.gamma * (1.0 / np.sqrt(np.maximum(l, t1)) - 1.0 / lam)
    return np.clip(np.where(l < t1, 1.0, np.where(l > t2, 0.0, mid)), 0.0, 1.0)


def regions(reg: SpRegularizer, losses, lam: float) -> np.ndarray:
    """Region label per loss: 'E', 'M', or 'D' (dtype <U1)."""
    _check(losses, lam)
    l = np.asarray(losses, dtype=float)
    if reg.family == "mixture":
        return np.where(l < reg.lower_threshold(lam), "E",
                        np.where(l > reg.upper_threshold(lam), "D", "M"))
    return np.where(l < lam, "E", "D")


def weights_and_grads(reg: SpRegularizer, losses, lam: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(v, dv/dl, dv/dlam) per sample; boundary points take their tie-rule region's branch."""
    _check(losses, lam)
    l = np.asarray(losses, dtype=float)
    v = weights(reg, l, lam)
    dl = np.zeros_like(l)
    dlam = np.zeros_like(l)
    if reg.family == "linear":
        e = l < lam
        dl[e] = -1.0 / lam
        dlam[e] = l[e] / lam**2
    elif reg.family == "mixture":
        m = (l >= reg.lower_threshold(lam)) & (l <= reg.upper_threshold(lam))
        dl[m] = -(reg.gamma / 2.0) * l[m] ** -1.5
        dlam[m] = reg.gamma / lam**2
    return v, dl, dlam


def implicit_losses(reg: SpRegularizer, losses, lam: float) -> np.ndarray:
    """F_lam(l) = integral of v*(tau, lam) dtau from 0 to l, in closed form."""
    _check(losses, lam)
    l = np.asarray(losses, dtype=float)
    if reg.family == "hard":
        return np.minimum(l, lam)
    if reg.family == "linear":
        return np.where(l < lam, l - l * l / (2.0 * lam), lam / 2.0)
    g = reg.gamma
    t1 = reg.lower_threshold(lam)
    t2 = reg.upper_threshold(lam)
    lm = np.clip(l, t1, t2)
    # on M: integral of gamma*(tau^{-1/2} - 1/lam) = 2*gamma*sqrt(tau) - (gamma/lam)*tau
    mid = t1 + 2.0 * g * (np.sqrt(lm) - np.sqrt(t1)) - (g / lam) * (lm - t1)
    return np.where(l < t1, l, mid)


# ---------------------------------------------------------------------------
# scalar operations


def weight(reg: SpRegularizer, loss: float, lam: float) -> float:
    """Optimal sample weight v*(loss, lam) in [0,1]."""
    return float(weights(reg, loss, lam))


def region(reg: SpRegularizer, loss: float, lam: float) -> str:
    """Region label 'E', 'M', or 'D' for one loss value."""
    return str(regions(reg, loss, lam))


def weight_grads(reg: SpRegularizer, loss: float, lam: float) -> tuple[float, float]:
    """(dv*/dl, dv*/dlam) strictly inside a region; errors on an exact boundary."""
    _check(loss, lam)
    if loss == reg.lower_threshold(lam) or loss == reg.upper_threshold(lam):
        raise ValueError(f"loss {loss} lies exactly on a region boundary at lam={lam}")
    _, dl, dlam = weights_and_grads(reg, loss, lam)
    return float(dl), float(dlam)


def implicit_loss(reg: SpRegularizer, loss: float, lam: float) -> float:
    """The latent self-paced loss F_lam(loss) (integral of the weight rule)."""
    return float(implicit_losses(reg, loss, lam))
