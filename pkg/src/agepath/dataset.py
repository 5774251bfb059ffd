"""Dataset loading, synthesis, splitting, standardization, and noise injection.

Classification targets are always stored as exactly -1/+1; regression
targets are unconstrained reals.  Datasets are immutable after
construction (the backing arrays are write-locked) so they can be shared
freely between solver runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "NoiseSpec",
    "Standardization",
    "inject_noise",
    "load",
    "save",
    "split",
    "standardize",
    "synthesize",
    "load_descriptor",
    "save_descriptor",
]


# ---------------------------------------------------------------------------
# core types


@dataclass(frozen=True)
class Dataset:
    """An n x d design matrix plus targets and a task tag."""

    features: np.ndarray
    targets: np.ndarray
    task: str  # "classification" | "regression"
    feature_names: list[str] | None = None

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(np.asarray(self.features, dtype=float))
        y = np.ascontiguousarray(np.asarray(self.targets, dtype=float))
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a nonempty 2-d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"targets length {y.shape} does not match n={X.shape[0]}")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("non-finite entry in dataset")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "classification" and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("classification targets must be exactly -1/+1")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match d")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption recipe: fraction of rows, mechanism, RNG seed."""

    ratio: float
    kind: str  # "label_flip" | "target_perturb"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0,1], got {self.ratio}")
        if self.kind not in ("label_flip", "target_perturb"):
            raise ValueError(f"unknown noise kind {self.kind!r}")


@dataclass(frozen=True)
class Standardization:
    """Per-feature affine transform recorded so predictions can be undone."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def invert(self, X: np.ndarray) -> np.ndarray:
        return X * self.scale + self.mean


# ---------------------------------------------------------------------------
# I/O


def load(path: str, format: str = "csv", task: str = "classification") -> Dataset:
    """Load a dataset from CSV (header row, target in last column) or libsvm text.

    CSV {0,1} classification labels are remapped to -1/+1.  Parse errors
    report the offending line number.
    """
    if format == "csv":
        return _load_csv(path, task)
    if format == "libsvm":
        return _load_libsvm(path, task)
    raise ValueError(f"unknown format {format!r}")


def _load_csv(path: str, task: str) -> Dataset:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) < 2:
        raise ValueError(f"{path}:1: need at least one feature column plus target")
    ncol = len(header)
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != ncol:
            raise ValueError(f"{path}:{lineno}: expected {ncol} columns, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not all(np.isfinite(vals)):
            raise ValueError(f"{path}:{lineno}: non-finite value")
        rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    X, y = data[:, :-1], data[:, -1]
    if task == "classification":
        y = _remap_labels(y, path)
    return Dataset(X, y, task, feature_names=header[:-1])


def _remap_labels(y: np.ndarray, path: str) -> np.ndarray:
    uniq = set(np.unique(y).tolist())
    if uniq <= {0.0, 1.0}:
        return np.where(y > 0.5, 1.0, -1.0)
    if uniq <= {-1.0, 1.0}:
        return y
    raise ValueError(f"{path}: classification labels must be in {{0,1}} or {{-1,+1}}, got {sorted(uniq)}")


def _load_libsvm(path: str, task: str) -> Dataset:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    labels: list[float] = []
    rows: list[dict[int, float]] = []
    dmax = 0
    for lineno, ln in enumerate(lines, start=1):
        parts = ln.split()
        try:
            lab = float(parts[0])
            entries = {}
            for tok in parts[1:]:
                idx_s, val_s = tok.split(":")
                idx, val = int(idx_s), float(val_s)
                if idx < 1:
                    raise ValueError(f"index {idx} < 1")
                entries[idx] = val
                dmax = max(dmax, idx)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not np.isfinite(lab) or not all(np.isfinite(v) for v in entries.values()):
            raise ValueError(f"{path}:{lineno}: non-finite value")
        labels.append(lab)
        rows.append(entries)
    if dmax == 0:
        raise ValueError(f"{path}: no feature entries")
    X = np.zeros((len(rows), dmax))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    y = np.asarray(labels)
    if task == "classification":
        y = _remap_labels(y, path)
    return Dataset(X, y, task)


def save(ds: Dataset, path: str) -> None:
    """Write a dataset as CSV with 17-significant-digit formatting (lossless round-trip)."""
    names = ds.feature_names or [f"x{j}" for j in range(ds.d)]
    with open(path, "w") as fh:
        fh.write(",".join([*names, "target"]) + "\n")
        for i in range(ds.n):
            row = [*ds.features[i], ds.targets[i]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def save_descriptor(meta: dict, path: str) -> None:
    """Write the synthetic-dataset JSON descriptor {n, d, task, seed, w0}."""
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, default=lambda o: np.asarray(o).tolist())
        fh.write("\n")


def load_descriptor(path: str) -> tuple[Dataset, dict]:
    """Re-synthesize a dataset from its JSON descriptor."""
    with open(path) as fh:
        meta = json.load(fh)
    return synthesize(meta["n"], meta["d"], meta["task"], meta["seed"],
                      noise_scale=meta.get("noise_scale", 0.1),
                      separation=meta.get("separation", 4.0))


# ---------------------------------------------------------------------------
# generation / transformation


def synthesize(
    n: int,
    d: int,
    task: str,
    seed: int,
    noise_scale: float = 0.1,
    separation: float = 4.0,
    target_scale: float = 1.0,
) -> tuple[Dataset, dict]:
    """Deterministic synthetic data; returns the dataset plus generator parameters.

    regression: X ~ N(0,1), y = target_scale*(X w0 + noise_scale * eps).
    classification: two unit-variance Gaussian blobs `separation` sigmas apart.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    meta: dict = {"n": n, "d": d, "task": task, "seed": seed,
                  "noise_scale": noise_scale, "separation": separation}
    if task == "regression":
        X = rng.standard_normal((n, d))
        w0 = rng.standard_normal(d)
        y = target_scale * (X @ w0 + noise_scale * rng.standard_normal(n))
        meta["w0"] = w0 * target_scale
    elif task == "classification":
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        direction = np.zeros(d)
        direction[0] = 1.0
        X = rng.standard_normal((n, d)) + (separation / 2.0) * y[:, None] * direction
        meta["w0"] = direction
    else:
        raise ValueError(f"unknown task {task!r}")
    return Dataset(X, y, task), meta


def inject_noise(ds: Dataset, spec: NoiseSpec) -> tuple[Dataset, np.ndarray]:
    """Corrupt exactly round(ratio*n) rows; returns (dataset, corrupted indices)."""
    if spec.kind == "label_flip" and ds.task != "classification":
        raise ValueError("label_flip requires a classification dataset")
    if spec.kind == "target_perturb" and ds.task != "regression":
        raise ValueError("target_perturb requires a regression dataset")
    k = int(np.floor(spec.ratio * ds.n + 0.5))
    rng = np.random.default_rng(spec.seed)
    idx = np.sort(rng.choice(ds.n, size=k, replace=False))
    y = ds.targets.copy()
    if spec.kind == "label_flip":
        y[idx] = -y[idx]
    else:
        # replacement values drawn from a Gaussian fit to the clean targets
        mu, sd = float(np.mean(ds.targets)), float(np.std(ds.targets))
        y[idx] = rng.normal(mu, sd, size=k)
    return Dataset(ds.features, y, ds.task, ds.feature_names), idx


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint random row split of sizes round(f*n) and n - round(f*n)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0,1)")
    k = int(np.floor(train_fraction * ds.n + 0.5))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    tr, te = np.sort(perm[:k]), np.sort(perm[k:])
    mk = lambda idx: Dataset(ds.features[idx], ds.targets[idx], ds.task, ds.feature_names)
    return mk(tr), mk(te)


def standardize(ds: Dataset) -> tuple[Dataset, Standardization]:
    """Zero-mean unit-variance features (opt-in); constant columns keep scale 1."""
    mean = ds.features.mean(axis=0)
    scale = ds.features.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    tf = Standardization(mean, scale)
    return Dataset(tf.apply(ds.features), ds.targets, ds.task, ds.feature_names), tf
