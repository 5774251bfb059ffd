"""Command-line surface: path tracing, ACS sweeps, benchmarking, verification.

    agepath <path|acs|bench|verify> --model <svm|lasso|logistic>
            --reg <hard|linear|mixture> [--gamma G] [--C C] [--alpha A]
            [--kernel-gamma GK] --lmin L --lmax U [--acs-step S]
            [--data FILE | --synth n,d] [--noise RATIO] [--seed N]
            [--out DIR] [--config FILE]

Flags override config-file entries, which override defaults.  The config
file is flat `key = value` text using the long flag names without dashes
(e.g. `model = lasso`).  Set AGEPATH_LOG to error|info|debug for logging.
Exports are deterministic: JSON-lines records plus a CSV of parameter
columns, all floats at 17 significant digits (lossless re-import).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset as D
from . import regularizers as R
from .acs import (AcsConfig, ModelKind, acs_grid_path, acs_solve,
                  implicit_stationarity, unweighted_init)
from .models import LassoHyper, LogitHyper, SvmHyper, make_plugin
from .path import TraceConfig, evaluate_path, full_derivative, trace_path

log = logging.getLogger("agepath")

__all__ = ["main", "run_path", "run_acs", "run_bench", "run_verify", "export_path"]


# ---------------------------------------------------------------------------
# configuration


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agepath", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=["path", "acs", "bench", "verify"])
    p.add_argument("--model", choices=["svm", "lasso", "logistic"])
    p.add_argument("--reg", choices=["hard", "linear", "mixture"])
    p.add_argument("--gamma", type=float, help="mixture regularizer gamma")
    p.add_argument("--C", type=float, dest="C", help="SVM/logistic loss scale")
    p.add_argument("--alpha", type=float, help="Lasso L1 strength")
    p.add_argument("--kernel", choices=["linear", "gaussian"])
    p.add_argument("--kernel-gamma", type=float, dest="kernel_gamma")
    p.add_argument("--lmin", type=float)
    p.add_argument("--lmax", type=float)
    p.add_argument("--acs-step", type=float, dest="acs_step")
    p.add_argument("--data", help="CSV dataset (target in last column)")
    p.add_argument("--format", choices=["csv", "libsvm"], default=None)
    p.add_argument("--synth", help="n,d synthetic dataset spec")
    p.add_argument("--noise", type=float, help="corruption ratio in [0,1]")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="bench repetitions")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="flat key=value config file")
    return p


DEFAULTS = {
    "model": "lasso", "reg": "linear", "gamma": 1.0, "C": 1.0, "alpha": 0.1,
    "kernel": "linear", "kernel_gamma": 1.0, "lmin": 0.1, "lmax": 20.0,
    "acs_step": 0.5, "data": None, "format": None, "synth": None,
    "noise": None, "seed": 0, "trials": 20, "out": None, "config": None,
}


def _read_config_file(path: str) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = val
    return out


def resolve_config(argv: list[str]) -> dict:
    """Merge defaults < config file < command-line flags."""
    ns = _build_parser().parse_args(argv)
    cfg = dict(DEFAULTS)
    if ns.config:
        for k, v in _read_config_file(ns.config).items():
            ref = DEFAULTS[k]
            if isinstance(ref, bool):
                cfg[k] = v.lower() in ("1", "true", "yes")
            elif isinstance(ref, int) and not isinstance(ref, bool):
                cfg[k] = int(v)
            elif isinstance(ref, float):
                cfg[k] = float(v)
            else:
                cfg[k] = v
    for k in DEFAULTS:
        v = getattr(ns, k, None)
        if v is not None:
            cfg[k] = v
    cfg["command"] = ns.command
    if not (0 < cfg["lmin"] < cfg["lmax"]):
        raise ValueError("need 0 < lmin < lmax")
    return cfg


def _make_reg(cfg: dict) -> R.SpRegularizer:
    fam = cfg["reg"]
    return R.SpRegularizer(fam, cfg["gamma"] if fam == "mixture" else None)


def _make_hyper(cfg: dict):
    model = ModelKind(cfg["model"])
    if model == ModelKind.SVM:
        kg = cfg["kernel_gamma"] if cfg["kernel"] == "gaussian" else None
        return SvmHyper(C=cfg["C"], kernel=cfg["kernel"], kernel_gamma=kg)
    if model == ModelKind.LASSO:
        return LassoHyper(alpha=cfg["alpha"])
    return LogitHyper(C=cfg["C"])


def _make_dataset(cfg: dict) -> D.Dataset:
    model = ModelKind(cfg["model"])
    task = "regression" if model == ModelKind.LASSO else "classification"
    if cfg["data"]:
        fmt = cfg["format"] or ("libsvm" if str(cfg["data"]).endswith(".libsvm") else "csv")
        ds = D.load(cfg["data"], format=fmt, task=task)
    elif cfg["synth"]:
        n, d = (int(s) for s in str(cfg["synth"]).split(","))
        ds, _ = D.synthesize(n, d, task, cfg["seed"],
                             target_scale=5.0 if task == "regression" else 1.0)
    else:
        raise ValueError("provide --data FILE or --synth n,d")
    if cfg["noise"] is not None:
        kind = "label_flip" if task == "classification" else "target_perturb"
        ds, _ = D.inject_noise(ds, D.NoiseSpec(cfg["noise"], kind, cfg["seed"]))
    return ds


# ---------------------------------------------------------------------------
# export


def _fmt(x) -> float:
    return float(f"{float(x):.17g}")


def export_path(path_obj, plugin, out_dir: str, stem: str = "path") -> tuple[str, str]:
    """Write JSONL + CSV exports; returns the two file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = plugin.param_names()
    jl = out / f"{stem}.jsonl"
    events_by_lam = {}
    for e in path_obj.events:
        events_by_lam.setdefault(e.lam, []).append(e)
    with open(jl, "w") as fh:
        # wall_time is excluded so identical runs export identical bytes
        meta = {k: v for k, v in path_obj.meta.items() if k != "wall_time"}
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for p in path_obj.points:
            counts = {lab: len(p.partition.get(lab, ()))
                      for lab in ("E", "M", "D") if lab in p.partition}
            if "EN" in p.partition or "EZ" in p.partition or "EP" in p.partition:
                counts["E"] = sum(len(p.partition.get(k, ())) for k in ("EN", "EZ", "EP"))
            rec = {
                "lambda": _fmt(p.lam),
                "params": {nm: _fmt(v) for nm, v in zip(names, p.params)},
                "v_summary": {"mean": _fmt(np.mean(p.weights)), **counts},
                "segment": p.segment,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for e in path_obj.events:
            fh.write(json.dumps({"event": {"lambda": _fmt(e.lam), "kind": e.kind,
                                           "violators": [list(v) for v in e.violators],
                                           "restarted": e.restarted}},
                                sort_keys=True) + "\n")
    csvp = out / f"{stem}.csv"
    with open(csvp, "w") as fh:
        fh.write(",".join(["lambda", *names]) + "\n")
        for p in path_obj.points:
            fh.write(",".join(f"{v:.17g}" for v in [p.lam, *p.params]) + "\n")
    return str(jl), str(csvp)


# ---------------------------------------------------------------------------
# commands


def run_path(cfg: dict) -> dict:
    ds = _make_dataset(cfg)
    reg = _make_reg(cfg)
    hyper = _make_hyper(cfg)
    plugin = make_plugin(ModelKind(cfg["model"]), ds, hyper, reg)
    path_obj = trace_path(plugin, cfg["lmin"], cfg["lmax"])
    summary = dict(path_obj.meta)
    summary["n_points"] = len(path_obj.points)
    if cfg["out"]:
        jl, csvp = export_path(path_obj, plugin, cfg["out"])
        summary["jsonl"] = jl
        summary["csv"] = csvp
    return summary


def run_acs(cfg: dict) -> dict:
    ds = _make_dataset(cfg)
    reg = _make_reg(cfg)
    hyper = _make_hyper(cfg)
    grid = _grid(cfg["lmin"], cfg["lmax"], cfg["acs_step"])
    model = ModelKind(cfg["model"])
    t0 = time.perf_counter()
    seed = unweighted_init(model, ds, hyper)
    pos = acs_grid_path(model, ds, grid, hyper, reg, init=seed)
    wall = time.perf_counter() - t0
    summary = {"command": "acs", "grid_points": len(pos), "wall_time": wall,
               "converged": all(p.converged for p in pos)}
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        fp = out / "acs_grid.jsonl"
        with open(fp, "w") as fh:
            fh.write(json.dumps({"meta": {k: cfg[k] for k in
                                          ("model", "reg", "lmin", "lmax", "acs_step", "seed")}},
                                sort_keys=True) + "\n")
            for po in pos:
                fh.write(json.dumps({"lambda": _fmt(po.lam),
                                     "params": [_fmt(v) for v in po.params],
                                     "outer_iters": po.outer_iters}, sort_keys=True) + "\n")
        summary["jsonl"] = str(fp)
    return summary


def _grid(lmin: float, lmax: float, step: float) -> np.ndarray:
    k = int(np.floor((lmax - lmin) / step + 1e-12))
    grid = np.minimum(lmin + step * np.arange(k + 1), lmax)
    if grid[-1] < lmax - 1e-12:
        grid = np.append(grid, lmax)
    return grid


def run_bench(cfg: dict, trials: int | None = None) -> dict:
    """Time GAGA against the warm-started ACS grid sweep on identical data."""
    trials = trials if trials is not None else cfg["trials"]
    model = ModelKind(cfg["model"])
    reg = _make_reg(cfg)
    results = []
    for trial in range(trials):
        seed = cfg["seed"] + trial
        trial_cfg = dict(cfg, seed=seed)
        ds = _make_dataset(trial_cfg)
        hyper = _make_hyper(cfg)
        plugin = make_plugin(model, ds, hyper, reg)  # kernel precompute shared
        grid = _grid(cfg["lmin"], cfg["lmax"], cfg["acs_step"])

        t0 = time.perf_counter()
        path_obj = trace_path(plugin, cfg["lmin"], cfg["lmax"])
        t_gaga = time.perf_counter() - t0

        t0 = time.perf_counter()
        pos = acs_grid_path(model, ds, grid, hyper, reg,
                            init=unweighted_init(model, ds, hyper))
        t_acs = time.perf_counter() - t0

        dev = 0.0
        for po in pos:
            if path_obj.lam_min <= po.lam <= path_obj.lam_max:
                dev = max(dev, float(np.max(np.abs(
                    evaluate_path(path_obj, po.lam) - po.params))))
        results.append({"seed": seed, "gaga_s": t_gaga, "acs_s": t_acs,
                        "speedup": t_acs / t_gaga if t_gaga > 0 else float("inf"),
                        "max_grid_deviation": dev,
                        "events": path_obj.meta["n_events"]})
    g = np.array([r["gaga_s"] for r in results])
    a = np.array([r["acs_s"] for r in results])
    report = {
        "command": "bench", "trials": trials,
        "gaga_mean_s": float(g.mean()), "gaga_std_s": float(g.std()),
        "acs_mean_s": float(a.mean()), "acs_std_s": float(a.std()),
        "speedup_mean": float((a / g).mean()),
        "wins": int(np.sum(g < a)),
        "per_trial": results,
    }
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def run_verify(cfg: dict, rhs_scale: float = 1.0) -> dict:
    """Oracle suite on one configured instance.

    rhs_scale is a fault-injection hook: scaling the analytic derivative
    must make the finite-difference check fail (used by tests).
    """
    model = ModelKind(cfg["model"])
    ds = _make_dataset(cfg)
    reg = _make_reg(cfg)
    hyper = _make_hyper(cfg)
    plugin = make_plugin(model, ds, hyper, reg)
    checks: dict[str, dict] = {}

    path_obj = trace_path(plugin, cfg["lmin"], cfg["lmax"])
    checks["events"] = {
        "turning": path_obj.meta["n_turning"], "jump": path_obj.meta["n_jump"],
        "restarts": path_obj.meta["n_restarts"],
        "pass": bool(path_obj.meta["n_restarts"] == path_obj.meta["n_jump"]),
    }

    # KKT residual sweep along the traced path
    qs = np.linspace(cfg["lmin"], cfg["lmax"], 100)
    worst = 0.0
    for lq in qs:
        st = plugin.state_from_params(evaluate_path(path_obj, lq), lq)
        worst = max(worst, plugin.kkt_residual(st, lq))
    checks["kkt_sweep"] = {"max_residual": float(worst),
                           "pass": bool(worst <= 1e-6)}

    # dense ACS vs path agreement away from jumps; the grid is seeded with
    # the v=1 fit so both methods track the same partial-optimum branch
    step = max((cfg["lmax"] - cfg["lmin"]) / 200.0, 1e-4)
    grid = _grid(cfg["lmin"], cfg["lmax"], step)
    pos = acs_grid_path(model, ds, grid, hyper, reg,
                        init=unweighted_init(model, ds, hyper))
    jump_lams = [e.lam for e in path_obj.events if e.kind == "jump"]
    dev = 0.0
    for po in pos:
        if any(abs(po.lam - jl) < 1e-2 * (cfg["lmax"] - cfg["lmin"]) for jl in jump_lams):
            continue
        dev = max(dev, float(np.max(np.abs(evaluate_path(path_obj, po.lam) - po.params))))
    checks["path_consistency"] = {"sup_deviation": dev,
                                  "pass": bool(dev <= 1e-3)}

    # rhs vs ACS central differences at interior grid points
    h = 1e-4
    tight = AcsConfig(outer_tol=1e-8)
    rel_errs = []
    for po in pos[1:-1:40]:
        st = plugin.state_from_params(po.params, po.lam)
        if plugin.kkt_residual(st, po.lam) > 1e-6:
            continue
        der = rhs_scale * full_derivative(plugin, st, po.lam)
        lo = acs_solve(model, ds, po.lam - h, hyper, reg, tight, init=po.params)
        hi = acs_solve(model, ds, po.lam + h, hyper, reg, tight, init=po.params)
        fd = (hi.params - lo.params) / (2 * h)
        mask = np.abs(fd) > 1e-4
        if np.any(mask):
            rel_errs.append(float(np.max(np.abs(der[mask] - fd[mask]) / np.abs(fd[mask]))))
    max_rel = max(rel_errs) if rel_errs else 0.0
    checks["rhs_fd"] = {"max_rel_err": max_rel, "points": len(rel_errs),
                        "pass": bool(max_rel <= 1e-2)}

    # implicit-objective consistency at a few ACS fixed points
    gaps = []
    for po in pos[::60]:
        imp = implicit_stationarity(model, ds, po.params, po.lam, hyper, reg)
        st = plugin.state_from_params(po.params, po.lam)
        gaps.append(abs(imp - plugin.kkt_residual(st, po.lam)))
    gap = max(gaps) if gaps else 0.0
    checks["implicit_consistency"] = {"max_gap": float(gap),
                                      "pass": bool(gap <= 1e-6)}

    report = {"command": "verify", "checks": checks,
              "pass": all(c["pass"] for c in checks.values())}
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "verify.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("AGEPATH_LOG", "error"),
                                         logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        runner = {"path": run_path, "acs": run_acs,
                  "bench": run_bench, "verify": run_verify}[cfg["command"]]
        report = runner(cfg)
    except Exception as exc:
        print(f"agepath: error: {exc}", file=sys.stderr)
        if level == logging.DEBUG:
            raise
        return 2
    print(json.dumps(report, indent=2, sort_keys=True, default=str))
    if cfg["command"] == "verify" and not report["pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
