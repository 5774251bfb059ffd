"""Numerical substrate: min-norm pseudoinverse solves and event-aware ODE integration.

`pinv_solve` is an SVD-based Moore-Penrose solve used for every path
Jacobian system.  `integrate` wraps an adaptive embedded Runge-Kutta 4(5)
stepper with dense output; scalar monitor functions are sampled on the
dense interpolant of each accepted step, sign changes are refined by
bisection, and integration halts at the first event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import RK45

__all__ = ["pinv_solve", "IvpSpec", "IvpResult", "Terminal", "integrate"]

RANK_TOL = 1e-12  # relative singular-value cutoff
EVENT_LOC_TOL = 1e-8  # event bracket width, relative to the lambda span
ARM_TOL = 1e-9  # |monitor| below which its reference sign is not yet established


def pinv_solve(A: np.ndarray, b: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Minimum-norm least-squares solution A^+ b via SVD.

    Singular values below rank_tol * sigma_max are treated as zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite input to pinv_solve")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    if A.shape[0] == A.shape[1]:
        # fast path: a direct solve matches the pseudoinverse whenever A is
        # nonsingular; fall back to the SVD route on any sign of rank loss
        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            x = None
        if x is not None and np.all(np.isfinite(x)):
            scale = max(1.0, float(np.max(np.abs(b))))
            if (np.max(np.abs(x)) <= 1e8 * scale
                    and np.max(np.abs(A @ x - b)) <= 1e-9 * scale):
                return x
    try:
        x, _, rank, s = np.linalg.lstsq(A, b, rcond=rank_tol)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"SVD failed to converge: {exc}") from exc
    if rank == 0:
        return np.zeros(A.shape[1])
    return x


@dataclass
class IvpSpec:
    """An initial value problem on [lam0, lam1] with event monitors."""

    rhs: Callable[[float, np.ndarray], np.ndarray]
    lam0: float
    lam1: float
    y0: np.ndarray
    monitors: Callable[[float, np.ndarray], np.ndarray] | None = None
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float | None = None  # default (lam1-lam0)/10
    record_step: float | None = None  # extra dense samples at this spacing
    max_steps: int = 20_000  # accepted-step cap; exceeding it reports failure
    min_step: float | None = None  # default 1e-7*(lam1-lam0); sustained smaller
    # accepted steps indicate an approaching singularity and report failure

    def __post_init__(self) -> None:
        if not self.lam0 < self.lam1:
            raise ValueError("need lam0 < lam1")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))


@dataclass
class Terminal:
    status: str  # "reached" | "event" | "failure"
    monitor_indices: list[int] = field(default_factory=list)
    lam_event: float | None = None
    state_event: np.ndarray | None = None
    message: str = ""


@dataclass
class IvpResult:
    lams: np.ndarray  # strictly increasing sample points
    states: np.ndarray  # one row per sample point
    terminal: Terminal
    derivs: np.ndarray | None = None  # dy/dlam at the sample points


def _eval_monitors(fn, lam, y) -> np.ndarray:
    return np.atleast_1d(np.asarray(fn(lam, y), dtype=float))


def _dense_deriv(dense, t: float, t0: float, t1: float) -> np.ndarray:
    """Derivative of the dense interpolant at t by a central difference."""
    e = 1e-6 * (t1 - t0)
    tc = min(max(t, t0 + e), t1 - e)
    return (np.asarray(dense(tc + e)) - np.asarray(dense(tc - e))) / (2.0 * e)


def integrate(spec: IvpSpec) -> IvpResult:
    """Adaptive RK45 over [lam0, lam1], halting at the first monitor sign change.

    Monitors are checked on dense output at interior points of every
    accepted step; a detected crossing is bisected down to a bracket of
    width 1e-8*(lam1-lam0).  A monitor whose magnitude at the start is
    below an arming threshold only becomes active once it moves away from
    zero (so integration can resume exactly on a just-crossed boundary).
    """
    span = spec.lam1 - spec.lam0
    max_step = spec.max_step if spec.max_step is not None else span / 10.0
    f0 = np.asarray(spec.rhs(spec.lam0, spec.y0), dtype=float)
    if not np.all(np.isfinite(f0)):
        return IvpResult(np.array([spec.lam0]), spec.y0[None, :],
                         Terminal("failure", message="rhs non-finite at start"))

    have_mon = spec.monitors is not None
    if have_mon:
        m_prev = _eval_monitors(spec.monitors, spec.lam0, spec.y0)
        if not np.all(np.isfinite(m_prev)):
            return IvpResult(np.array([spec.lam0]), spec.y0[None, :],
                             Terminal("failure", message="monitor non-finite at start"))
        armed = np.abs(m_prev) > ARM_TOL
        sign_ref = np.where(armed, np.sign(m_prev), 0.0)

    stepper = RK45(spec.rhs, spec.lam0, spec.y0, spec.lam1,
                   max_step=max_step, rtol=spec.rtol, atol=spec.atol)
    lams = [spec.lam0]
    states = [spec.y0.copy()]
    derivs = [f0.copy()]
    min_step = spec.min_step if spec.min_step is not None else 1e-7 * span
    n_accepted = 0
    n_tiny = 0  # consecutive accepted steps below min_step

    def record(lam: float, y: np.ndarray, dy: np.ndarray) -> None:
        if lam > lams[-1]:
            lams.append(lam)
            states.append(np.asarray(y, dtype=float).copy())
            derivs.append(np.asarray(dy, dtype=float).copy())

    def result(terminal: Terminal) -> IvpResult:
        return IvpResult(np.asarray(lams), np.asarray(states), terminal,
                         np.asarray(derivs))

    while stepper.status == "running":
        try:
            msg = stepper.step()
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            return result(Terminal("failure", message=f"step failed: {exc}"))
        if stepper.status == "failed":
            return result(Terminal("failure", message=msg or "step size underflow"))
        if not np.all(np.isfinite(stepper.y)):
            return result(Terminal("failure", message="non-finite state"))
        t0, t1 = stepper.t_old, stepper.t
        n_accepted += 1
        n_tiny = n_tiny + 1 if (t1 - t0 < min_step and t1 < spec.lam1) else 0
        if n_accepted > spec.max_steps or n_tiny > 50:
            reason = ("step-count cap exceeded" if n_accepted > spec.max_steps
                      else "sustained step-size collapse (approaching singularity)")
            return result(Terminal("failure", message=reason))
        dense = stepper.dense_output()

        if have_mon:
            # sample the dense interpolant inside the step
            n_sub = 4
            ts = np.linspace(t0, t1, n_sub + 1)[1:]
            hit_lo = hit_hi = None
            for t in ts:
                yv = dense(t)
                m = _eval_monitors(spec.monitors, t, yv)
                if not np.all(np.isfinite(m)):
                    return result(Terminal("failure", message="monitor non-finite"))
                newly = (~armed) & (np.abs(m) > ARM_TOL)
                crossed = armed & (np.sign(m) != 0) & (np.sign(m) != sign_ref)
                if np.any(crossed):
                    hit_lo, hit_hi = (t - (t1 - t0) / n_sub, t)
                    break
                armed = armed | newly
                sign_ref = np.where(newly, np.sign(m), sign_ref)
                m_prev = m
            if hit_lo is not None:
                lam_e, idxs = _bisect_event(spec, dense, hit_lo, hit_hi, armed, sign_ref, span)
                y_e = dense(lam_e)
                _record_dense(record, dense, t0, lam_e, spec.record_step)
                record(lam_e, y_e, _dense_deriv(dense, lam_e, t0, t1))
                return result(Terminal("event", monitor_indices=idxs,
                                       lam_event=lam_e, state_event=y_e))
        _record_dense(record, dense, t0, t1, spec.record_step)
        record(t1, stepper.y, _dense_deriv(dense, t1, t0, t1))

    return result(Terminal("reached"))


def _record_dense(record, dense, t0: float, t1: float, step: float | None) -> None:
    if step is None or t1 - t0 <= step:
        return
    for t in np.arange(t0 + step, t1 - 0.5 * step, step):
        record(t, dense(t), _dense_deriv(dense, t, t0, t1))


def _bisect_event(spec, dense, lo, hi, armed, sign_ref, span) -> tuple[float, list[int]]:
    """Shrink [lo, hi] around the first sign change; returns (lam_event, monitor indices)."""
    tol = EVENT_LOC_TOL * span
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        m = _eval_monitors(spec.monitors, mid, dense(mid))
        crossed = armed & (np.sign(m) != 0) & (np.sign(m) != sign_ref)
        if np.any(crossed):
            hi = mid
        else:
            lo = mid
    m = _eval_monitors(spec.monitors, hi, dense(hi))
    crossed = armed & (np.sign(m) != 0) & (np.sign(m) != sign_ref)
    idxs = [int(i) for i in np.flatnonzero(crossed)]
    if not idxs:  # crossing evaporated inside the bracket; report nearest monitor
        idxs = [int(np.argmin(np.abs(m)))]
    return hi, idxs
