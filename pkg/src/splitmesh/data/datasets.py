"""In-memory datasets: synthetic generators and the CSV / ``.nt`` directory loaders."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import IoError, NoUsableRows, ShapeMismatch, UnknownColumn
from ..rng import SplitMix64
from .tensorfile import read_nt

CLASSIFICATION = "classification"
REGRESSION = "regression"

# synthetic regression: ln(target) = INTERCEPT + features @ COEFFICIENTS (cycled to width) + noise,
# so targets stay positive and RMSLE is always defined
REGRESSION_INTERCEPT = 1.0
REGRESSION_COEFFICIENTS = (0.08, -0.03, 0.01, 0.05, 0.20, -0.10, 0.04)
CLASS_SEPARATION = 0.5
STD_FLOOR = 1e-8


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    task: str = CLASSIFICATION
    dropped: int = 0

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.float32).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ShapeMismatch(f"{self.features.shape[0]} samples but {self.labels.shape[0]} labels")
        if self.task == CLASSIFICATION and not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("classification labels must be 0 or 1")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return tuple(self.features.shape[1:])

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.task)


def _template(shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 3:
        c, h, w = shape
        yy, xx = np.mgrid[0:h, 0:w]
        sig = max(h, w) / 4.0
        bump = np.exp(-((yy - (h - 1) / 2) ** 2 + (xx - (w - 1) / 2) ** 2) / (2 * sig * sig))
        return np.broadcast_to(bump, shape).astype(np.float64)
    d = int(np.prod(shape))
    return np.where(np.arange(d) % 2 == 0, 1.0, -1.0).reshape(shape)


def synth(task: str, n: int, shape: Sequence[int], seed: int, noise: float = 1.0,
          positive_fraction: float = 0.5) -> Dataset:
    """Deterministic stand-in data.

    Classification: two Gaussian blobs at +/- CLASS_SEPARATION times a fixed
    template (a centred bump for images), unit noise. Labels are spread evenly,
    with ``positive_fraction`` of them positive. Regression: standard normal
    features and a positive log-linear target, see REGRESSION_COEFFICIENTS.
    """
    if n < 2:
        raise ValueError("synth needs n >= 2")
    shape = tuple(int(d) for d in shape)
    rng = SplitMix64(seed)
    d = int(np.prod(shape))
    if task == CLASSIFICATION:
        i = np.arange(n)
        labels = (np.floor((i + 1) * positive_fraction) > np.floor(i * positive_fraction)).astype(np.float64)
        signs = np.where(labels == 1, 1.0, -1.0)
        base = _template(shape).reshape(1, d) * CLASS_SEPARATION
        x = signs[:, None] * base + noise * rng.normal_array(n * d).reshape(n, d)
        return Dataset(x.reshape((n,) + shape), labels, CLASSIFICATION)
    if task == REGRESSION:
        if len(shape) != 1:
            raise ValueError("regression data is flat: shape must be [features]")
        x = rng.normal_array(n * d).reshape(n, d)
        coef = np.array([REGRESSION_COEFFICIENTS[k % len(REGRESSION_COEFFICIENTS)] for k in range(d)])
        log_y = REGRESSION_INTERCEPT + x @ coef
        if noise:
            log_y = log_y + noise * rng.normal_array(n)
        return Dataset(x, np.exp(log_y), REGRESSION)
    raise ValueError(f"unknown task {task!r}")


def zscore_stats(features: np.ndarray, rows: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(features, dtype=np.float64)[np.asarray(rows, dtype=np.int64)]
    mean = ref.mean(axis=0)
    std = np.maximum(ref.std(axis=0), STD_FLOOR)
    return mean, std


def normalize(ds: Dataset, train_rows: Sequence[int]) -> tuple[Dataset, tuple[np.ndarray, np.ndarray]]:
    """Z-score every row with statistics from ``train_rows`` only."""
    mean, std = zscore_stats(ds.features, train_rows)
    feats = (ds.features.astype(np.float64) - mean) / std
    return Dataset(feats, ds.labels, ds.task, ds.dropped), (mean, std)


def load_csv(path, features: Sequence[str] | None, label: str, train_rows: Sequence[int] | None = None,
             task: str = REGRESSION) -> Dataset:
    """Read a headed CSV. Rows with a missing or non-numeric value in a used column
    are dropped and counted in ``Dataset.dropped``. With ``train_rows`` (indices
    into the kept rows) features are z-scored using those rows' statistics."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise NoUsableRows(f"{path} is empty") from None
            rows = list(reader)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    header = [h.strip() for h in header]
    if features is None:
        features = [h for h in header if h != label]
    for col in list(features) + [label]:
        if col not in header:
            raise UnknownColumn(f"column {col!r} not in {path} header {header}")
    cols = [header.index(c) for c in features]
    lab = header.index(label)
    xs, ys, dropped = [], [], 0
    for row in rows:
        if not row:
            continue
        try:
            vals = [float(row[c]) for c in cols]
            y = float(row[lab])
        except (ValueError, IndexError):
            dropped += 1
            continue
        if not all(math.isfinite(v) for v in vals) or not math.isfinite(y):
            dropped += 1
            continue
        xs.append(vals)
        ys.append(y)
    if not xs:
        raise NoUsableRows(f"{path} has no usable rows ({dropped} dropped)")
    ds = Dataset(np.array(xs, dtype=np.float64), np.array(ys), task, dropped)
    if train_rows is not None:
        ds, _ = normalize(ds, train_rows)
    return ds


def load_tensor_dir(path) -> Dataset:
    """Positive examples from ``pos/*.nt`` (label 1) then negatives from ``neg/*.nt``, each path-sorted."""
    root = Path(path)
    if not root.is_dir():
        raise IoError(f"{path} is not a directory")
    files = [(f, 1.0) for f in sorted((root / "pos").glob("*.nt"))]
    files += [(f, 0.0) for f in sorted((root / "neg").glob("*.nt"))]
    if not files:
        raise NoUsableRows(f"no .nt files under {path}/pos or {path}/neg")
    tensors, labels = [], []
    for f, y in files:
        t = read_nt(f)
        if tensors and t.shape != tensors[0].shape:
            raise ShapeMismatch(f"{f} has shape {list(t.shape)}, expected {list(tensors[0].shape)}")
        tensors.append(t)
        labels.append(y)
    return Dataset(np.stack(tensors), np.array(labels), CLASSIFICATION)
