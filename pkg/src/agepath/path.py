"""Age-path tracker: segment-wise ODE integration with event handling.

Starting from a partial optimum at lam_min, each partition segment is
advanced by the model plugin's KKT-system ODE until a monitor (margin,
box bound, coefficient, subgradient, or region threshold) changes sign.
The partition is updated for the crossing quantities; if the updated
state still satisfies the KKT system the event is a turning point and
integration resumes in place, otherwise it is a jump and the tracker
warm-starts the ACS solver slightly past the event.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import regularizers as R
from .acs import AcsConfig, acs_solve, unweighted_init, PartialOptimum
from .numerics import IvpSpec, integrate

log = logging.getLogger("agepath")

__all__ = [
    "TraceConfig",
    "PathPoint",
    "CriticalEvent",
    "AgePath",
    "trace_path",
    "classify_event",
    "evaluate_path",
    "best_on_path",
]


@dataclass
class TraceConfig:
    kkt_tol: float = 1e-6
    delta: float | None = None  # jump warm-start offset; default 1e-3 * span
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float | None = None  # default span / 10
    record_step: float | None = None  # default span / 4000
    max_events: int | None = None  # default 50 * n
    acs: AcsConfig = field(default_factory=AcsConfig)


@dataclass
class PathPoint:
    lam: float
    params: np.ndarray
    weights: np.ndarray
    partition: dict[str, tuple[int, ...]]
    segment: int
    deriv: np.ndarray | None = None  # d(params)/dlam, for Hermite interpolation


def full_derivative(plugin, state, lam: float) -> np.ndarray:
    """d(params)/dlam of the full parameter vector; pinned components are zero."""
    vec = plugin.pack(state)
    out = np.zeros_like(plugin.params_from_state(state))
    if vec.size == 0:
        return out
    dvec = plugin.rhs(lam, vec, state)
    for k, j in enumerate(plugin.pack_index_map(state)):
        out[j] = dvec[k]
    return out


@dataclass
class CriticalEvent:
    lam: float
    kind: str  # "turning" | "jump"
    violators: list[tuple]
    restarted: bool

    def __post_init__(self) -> None:
        if (self.kind == "jump") != self.restarted:
            raise ValueError("jump events and restarts must coincide")


@dataclass
class AgePath:
    points: list[PathPoint]
    events: list[CriticalEvent]
    meta: dict

    @property
    def lam_min(self) -> float:
        return self.points[0].lam

    @property
    def lam_max(self) -> float:
        return self.points[-1].lam


def classify_event(plugin, state, lam: float, kkt_tol: float = 1e-6) -> str:
    """Turning iff the repartitioned state still satisfies the KKT system."""
    return "turning" if plugin.kkt_residual(state, lam) <= kkt_tol else "jump"


def trace_path(
    plugin,
    lam_min: float,
    lam_max: float,
    init: PartialOptimum | None = None,
    cfg: TraceConfig | None = None,
) -> AgePath:
    """Trace the age-path of `plugin` over [lam_min, lam_max].

    `init` must be a partial optimum at lam_min (obtained via ACS when
    omitted).  Returns the recorded path with its critical-event log.
    """
    if not 0 < lam_min < lam_max:
        raise ValueError("need 0 < lam_min < lam_max")
    cfg = cfg or TraceConfig()
    span = lam_max - lam_min
    delta = cfg.delta if cfg.delta is not None else 1e-3 * span
    record_step = cfg.record_step if cfg.record_step is not None else span / 4000.0
    max_events = cfg.max_events if cfg.max_events is not None else 50 * plugin.ds.n

    t_start = time.perf_counter()
    if init is None:
        seed = unweighted_init(plugin.model, plugin.ds, plugin.hyper, cfg.acs)
        init = acs_solve(plugin.model, plugin.ds, lam_min, plugin.hyper, plugin.reg,
                         cfg.acs, init=seed)
    state = plugin.state_from_params(np.asarray(init.params, dtype=float), lam_min)
    resid0 = plugin.kkt_residual(state, lam_min)
    if resid0 > cfg.kkt_tol:
        raise ValueError(f"initial state is not a partial optimum (KKT residual {resid0:.3e})")

    points: list[PathPoint] = []
    events: list[CriticalEvent] = []
    segment = 0
    snap_cache: dict = {}  # partition snapshot, constant within a segment piece

    def record(lam: float, st, append_dup: bool = False,
               packed_deriv: np.ndarray | None = None) -> None:
        if points and lam <= points[-1].lam:
            if lam != points[-1].lam:
                return
            if not append_dup:
                points.pop()  # replace: post-event state wins at an equal lam
        if packed_deriv is None:
            deriv = full_derivative(plugin, st, lam)
        else:
            # scatter the integrator's packed derivative sample; pinned
            # components do not move inside a segment
            deriv = np.zeros_like(plugin.params_from_state(st))
            for k, j in enumerate(plugin.pack_index_map(st)):
                deriv[j] = packed_deriv[k]
        if "snap" not in snap_cache:
            snap_cache["snap"] = plugin.partition_snapshot(st)
        points.append(PathPoint(
            lam=float(lam),
            params=plugin.params_from_state(st),
            weights=plugin.weights(st, lam),
            partition=snap_cache["snap"],
            segment=segment,
            deriv=deriv,
        ))

    def restart(lam: float, st, reason: str) -> tuple[float, object]:
        """Warm-start ACS just past lam; returns the new segment anchor."""
        nonlocal segment
        lam_new = min(lam + delta, lam_max)
        po = acs_solve(plugin.model, plugin.ds, lam_new, plugin.hyper, plugin.reg,
                       cfg.acs, init=plugin.params_from_state(st))
        segment += 1
        snap_cache.clear()
        log.info("restart at lam=%.6g (%s)", lam_new, reason)
        return lam_new, plugin.state_from_params(po.params, lam_new)

    lam = lam_min
    record(lam, state)
    while lam < lam_max:
        if len(events) > max_events:
            raise RuntimeError(f"more than {max_events} events; runaway path")
        specs = plugin.monitor_specs(state)
        y0 = plugin.pack(state)
        if y0.size == 0:
            # nothing to integrate (e.g. empty Lasso active set): constant until
            # a monitor crossing, found by scanning monitors on the frozen state
            lam_next, crossed = _scan_static(plugin, state, specs, lam, lam_max)
            if lam_next > lam:
                record(lam_next, state)
            lam = lam_next
            if crossed is None:
                break
        else:
            spec = IvpSpec(
                rhs=lambda t, yv: plugin.rhs(t, yv, state),
                lam0=lam, lam1=lam_max, y0=y0,
                monitors=(lambda t, yv: plugin.monitors(t, yv, state, specs)) if specs else None,
                rtol=cfg.rtol, atol=cfg.atol,
                max_step=cfg.max_step, record_step=record_step,
            )
            res = integrate(spec)
            dvs = res.derivs if res.derivs is not None else np.zeros_like(res.states)
            # a monitor that starts on the wrong side of its boundary (inside
            # the arming band) never fires, so an inconsistent branch can slip
            # through event detection; the KKT residual at the recorded
            # samples catches that drift and downgrades the piece to a jump
            drift = None
            for t, yv, dv in zip(res.lams[1:], res.states[1:], dvs[1:]):
                st_t = plugin.unpack(state, yv, float(t))
                if plugin.kkt_residual(st_t, float(t)) > cfg.kkt_tol:
                    drift = (float(t), st_t)
                    break
                record(float(t), st_t, packed_deriv=dv)
            if drift is not None:
                lam_d, st_d = drift
                events.append(CriticalEvent(lam_d, "jump",
                                            [("segment", "kkt_drift", "warm_start")],
                                            True))
                lam, state = restart(lam_d, st_d, "KKT drift inside segment")
                record(lam, state)
                continue
            if res.terminal.status == "failure":
                lam_fail = float(res.lams[-1])
                st = plugin.unpack(state, res.states[-1], lam_fail)
                events.append(CriticalEvent(lam_fail, "jump",
                                            [("integrator", "failure", res.terminal.message)],
                                            True))
                lam, state = restart(lam_fail, st, f"integrator failure: {res.terminal.message}")
                record(lam, state)
                continue
            if res.terminal.status == "reached":
                lam = lam_max
                st = plugin.unpack(state, res.states[-1], lam)
                if plugin.kkt_residual(st, lam) > cfg.kkt_tol:
                    events.append(CriticalEvent(lam, "jump",
                                                [("segment", "drift", "warm_start")], True))
                    lam, state = restart(lam - delta, st, "terminal KKT drift")
                    record(lam, state)
                break
            lam_e = float(res.terminal.lam_event)
            state = plugin.unpack(state, res.terminal.state_event, lam_e)
            crossed = [specs[k] for k in res.terminal.monitor_indices]
            lam = lam_e

        # event handling (shared by static scan and integrator paths)
        new_state, violators = plugin.repartition(state, lam, crossed)
        if not violators:
            violators = [tuple(c) for c in crossed]
        kind = classify_event(plugin, new_state, lam, cfg.kkt_tol)
        if kind == "turning" and _is_chatter(events, lam, violators, span):
            # a violator bounced straight back across the boundary it just
            # crossed: no consistent smooth branch exists on either side, so
            # resolve the sliding regime as a jump
            kind = "jump"
        if kind == "turning":
            events.append(CriticalEvent(lam, "turning", violators, False))
            state = new_state
            snap_cache.clear()
            # append a second point at the event lambda: the pre-event point
            # keeps the old piece's derivative for interpolation on its side,
            # this one carries the new partition and derivative
            record(lam, state, append_dup=True)
        else:
            events.append(CriticalEvent(lam, "jump", violators, True))
            lam, state = restart(lam, new_state, "jump event")
            record(lam, state)
        if lam >= lam_max:
            break

    meta = {
        "model": str(plugin.model.value),
        "regularizer": plugin.reg.family,
        "gamma": plugin.reg.gamma,
        "lam_min": lam_min,
        "lam_max": lam_max,
        "kkt_tol": cfg.kkt_tol,
        "delta": delta,
        "n_events": len(events),
        "n_turning": sum(e.kind == "turning" for e in events),
        "n_jump": sum(e.kind == "jump" for e in events),
        "n_restarts": sum(e.restarted for e in events),
        "wall_time": time.perf_counter() - t_start,
    }
    return AgePath(points, events, meta)


def _is_chatter(events: list[CriticalEvent], lam: float, violators: list[tuple],
                span: float) -> bool:
    """True if a violator reverses its own move from an event at (nearly) the same lam."""
    tol = 1e-6 * span
    reversed_moves = {(i, dst, src) for i, src, dst in violators}
    for e in reversed(events):
        if lam - e.lam > tol:
            break
        if any(tuple(v) in reversed_moves for v in e.violators):
            return True
    return False


def _scan_static(plugin, state, specs, lam: float, lam_max: float):
    """Advance a frozen state to the first monitor crossing in (lam, lam_max]."""
    if not specs:
        return lam_max, None
    y0 = plugin.pack(state)
    m0 = plugin.monitors(lam, y0, state, specs)
    lo, hi = lam, lam_max
    m1 = plugin.monitors(hi, y0, state, specs)
    armed = np.abs(m0) > 1e-9
    crossed_hi = armed & (np.sign(m1) != 0) & (np.sign(m1) != np.sign(m0))
    if not np.any(crossed_hi):
        return lam_max, None
    for _ in range(200):
        if hi - lo <= 1e-8 * (lam_max - lam):
            break
        mid = 0.5 * (lo + hi)
        mm = plugin.monitors(mid, y0, state, specs)
        if np.any(armed & (np.sign(mm) != 0) & (np.sign(mm) != np.sign(m0))):
            hi = mid
        else:
            lo = mid
    mm = plugin.monitors(hi, y0, state, specs)
    crossed = armed & (np.sign(mm) != 0) & (np.sign(mm) != np.sign(m0))
    hits = [specs[k] for k in np.flatnonzero(crossed)]
    return (hi, hits) if hits else (lam_max, None)


def evaluate_path(path: AgePath, lam_query: float) -> np.ndarray:
    """Parameters at lam_query: Hermite interpolation inside a segment.

    Inside the narrow gap left by a jump the path is discontinuous at the
    event itself, so queries strictly past it take the post-restart branch.
    """
    pts = path.points
    if not pts or not pts[0].lam <= lam_query <= pts[-1].lam:
        raise ValueError(f"lam_query {lam_query} outside traced range")
    lams = np.array([p.lam for p in pts])
    k = int(np.searchsorted(lams, lam_query, side="right")) - 1
    if k + 1 >= len(pts):
        return pts[-1].params.copy()
    p0, p1 = pts[k], pts[k + 1]
    if lam_query == p0.lam or p1.lam == p0.lam:
        return p0.params.copy()
    if p1.segment != p0.segment:
        # first-order extrapolation back from the restart point; the gap is
        # O(1e-3) of the span, so the correction is second-order small
        if p1.deriv is not None and p1.deriv.shape == p1.params.shape:
            return p1.params + (lam_query - p1.lam) * p1.deriv
        return p1.params.copy()
    h = p1.lam - p0.lam
    t = (lam_query - p0.lam) / h
    dp = np.max(np.abs(p1.params - p0.params))
    slope_cap = 4.0 * dp + 1e-12  # near a fold the slopes explode; trust the secant
    if p0.deriv is not None and p1.deriv is not None \
            and p0.deriv.shape == p0.params.shape == p1.params.shape == p1.deriv.shape \
            and np.max(np.abs(h * p0.deriv)) <= slope_cap \
            and np.max(np.abs(h * p1.deriv)) <= slope_cap:
        # cubic Hermite basis
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return (h00 * p0.params + h10 * h * p0.deriv
                + h01 * p1.params + h11 * h * p1.deriv)
    return (1.0 - t) * p0.params + t * p1.params


def best_on_path(path: AgePath, scorer) -> tuple[float, np.ndarray, float]:
    """Scan recorded points for the minimum score; ties break toward smaller lam."""
    best = None
    for p in path.points:
        s = float(scorer(p.params))
        if best is None or s < best[2]:
            best = (p.lam, p.params, s)
    return best
