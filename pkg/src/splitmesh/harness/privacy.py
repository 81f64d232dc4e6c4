"""How much of an input image survives the client segment.

For each sampled input the report dumps the input and the client-side feature
map as ``.nt`` files. For every feature-map channel it records the peak
absolute normalized cross-correlation with the input. The channel is first
upsampled (nearest neighbour) to the input's height and width, and the peak is
taken over small integer shifts. The numbers are descriptive only.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..data.tensorfile import write_nt
from ..errors import Unsupported
from ..nn.network import Network
from .config import ExperimentConfig
from .experiment import build_nodes, prepare, run_split_local

REPORT_COLUMNS = ("sample", "label", "channel", "peak_abs_ncc", "shift_y", "shift_x")
DEFAULT_MAX_SHIFT = 2


def upsample_nearest(fmap: np.ndarray, height: int, width: int) -> np.ndarray:
    """[C, h, w] -> [C, height, width] by index replication."""
    _, h, w = fmap.shape
    rows = (np.arange(height) * h) // height
    cols = (np.arange(width) * w) // width
    return fmap[:, rows][:, :, cols]


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation of two equal-shape arrays; 0 if either is constant."""
    a = a.astype(np.float64).ravel()
    b = b.astype(np.float64).ravel()
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0.0 or not np.isfinite(denom):
        return 0.0
    return float(np.dot(a, b) / denom)


def peak_ncc(x: np.ndarray, y: np.ndarray, max_shift: int = DEFAULT_MAX_SHIFT) -> tuple[float, int, int]:
    """Largest |ncc| of 2-D ``x`` against ``y`` shifted by up to ``max_shift`` pixels, on the overlap."""
    H, W = x.shape
    best = (0.0, 0, 0)
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            ys, ye = max(0, dy), H + min(0, dy)
            xs, xe = max(0, dx), W + min(0, dx)
            if ye - ys < 2 or xe - xs < 2:
                continue
            r = abs(ncc(x[ys:ye, xs:xe], y[ys - dy:ye - dy, xs - dx:xe - dx]))
            if r > best[0]:
                best = (r, dy, dx)
    return best


def channel_correlations(sample: np.ndarray, fmap: np.ndarray, max_shift: int = DEFAULT_MAX_SHIFT
                         ) -> list[tuple[float, int, int]]:
    """Per feature-map channel peak |ncc| against the (channel-averaged) input image."""
    if sample.ndim != 3 or fmap.ndim != 3:
        raise Unsupported("privacy report needs [C, H, W] inputs and feature maps")
    image = sample.astype(np.float64).mean(axis=0)
    up = upsample_nearest(fmap.astype(np.float64), *image.shape)
    return [peak_ncc(image, ch, max_shift) for ch in up]


@dataclass
class PrivacyRow:
    sample: int
    label: float
    channel: int
    peak: float
    shift_y: int
    shift_x: int


@dataclass
class PrivacyReport:
    rows: list[PrivacyRow]
    files: list[tuple[Path, Path]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.sample, f"{r.label:g}", r.channel, f"{r.peak:.6f}", r.shift_y, r.shift_x])
        return buf.getvalue()

    def max_peak(self) -> float:
        return max((r.peak for r in self.rows), default=0.0)


def report_for_network(net: Network, features: np.ndarray, labels: np.ndarray, out: Path,
                       max_shift: int = DEFAULT_MAX_SHIFT) -> PrivacyReport:
    if len(net.input_shape) != 3:
        raise Unsupported(f"privacy report needs an image model, input shape is {list(net.input_shape)}")
    out.mkdir(parents=True, exist_ok=True)
    fmaps, _ = net.forward(features)
    if fmaps.ndim != 4:
        raise Unsupported("client segment output is not an image-shaped feature map")
    rows, files = [], []
    for i, (x, f) in enumerate(zip(features, fmaps)):
        xin, xfeat = out / f"sample{i:03d}_input.nt", out / f"sample{i:03d}_feature.nt"
        write_nt(xin, np.asarray(x, dtype=np.float32))
        write_nt(xfeat, np.asarray(f, dtype=np.float32))
        files.append((xin, xfeat))
        for c, (peak, dy, dx) in enumerate(channel_correlations(x, f, max_shift)):
            rows.append(PrivacyRow(i, float(labels[i]), c, peak, dy, dx))
    report = PrivacyReport(rows, files)
    (out / "correlations.csv").write_text(report.to_csv())
    return report


def privacy_report(cfg: ExperimentConfig, samples: int = 8, out: Optional[str] = None, train: bool = True,
                   max_shift: int = DEFAULT_MAX_SHIFT) -> PrivacyReport:
    """Dump input / feature-map pairs from client 0's segment, trained first unless ``train`` is False."""
    setup = prepare(cfg)
    if not setup.plan.model.is_image:
        raise Unsupported(f"privacy report needs an image model, input shape is "
                          f"{list(setup.plan.model.input_shape)}")
    if train:
        _, _, clients = run_split_local(setup)
    else:
        _, clients = build_nodes(setup)
    client = clients[0]
    ds = client.train
    n = min(samples, len(ds))
    dest = Path(out or cfg.out or "privacy_report")
    return report_for_network(client.net, ds.features[:n], ds.labels[:n], dest, max_shift)
