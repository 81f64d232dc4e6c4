"""Client-count by split-ratio sweeps.

Cell ``i`` of the grid runs with seed ``base_seed + i``. With ``repeats > 1``
repeat ``r`` of that cell uses ``base_seed + i + r * len(grid)``, so repeat 0
is always the cell's own recorded seed and any cell can be rerun alone.

Two files come out of a sweep:

- ``summary.csv``: one row per cell (long layout, gnuplot-ready).
- ``table.csv``: the same final metrics laid out wide, one column per cell,
  with rows for client count, ratio and the metric.

Neither file carries wall-clock times, so the bytes repeat for a fixed seed.
"""

from __future__ import annotations

import csv
import io
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from ..data.partition import parse_ratio
from ..errors import ConfigError, SplitMeshError
from .config import ExperimentConfig, validate_config
from .experiment import metrics_csv, run_experiment

log = logging.getLogger(__name__)

SUMMARY_SCHEMA = "# splitmesh-sweep v1"
SUMMARY_COLUMNS = ("cell", "client_count", "ratio", "seed", "repeats", "epochs", "final_train_loss",
                   "metric_name", "metric_mean", "metric_min", "metric_max", "status", "error")

STANDARD_GRID: tuple[tuple[int, str], ...] = (
    (3, "1:1:1"), (3, "7:2:1"), (3, "8:1:1"),
    (4, "1:1:1:1"), (4, "4:3:2:1"), (4, "7:1:1:1"),
    (5, "1:1:1:1:1"), (5, "4:2:2:1:1"), (5, "6:1:1:1:1"),
)


@dataclass
class CellResult:
    cell: int
    client_count: int
    ratio: str
    seed: int
    repeats: int
    epochs: int = 0
    final_train_loss: float = float("nan")
    metric_name: str = ""
    metrics: tuple[float, ...] = ()
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_list(self) -> list[str]:
        if not self.ok or not self.metrics:
            stats = ["", "", ""]
        else:
            stats = [f"{statistics.fmean(self.metrics):.6f}", f"{min(self.metrics):.6f}",
                     f"{max(self.metrics):.6f}"]
        loss = "" if not self.ok else f"{self.final_train_loss:.9g}"
        return [str(self.cell), str(self.client_count), self.ratio, str(self.seed), str(self.repeats),
                str(self.epochs), loss, self.metric_name, *stats, "ok" if self.ok else "failed",
                self.error or ""]


@dataclass
class SweepResult:
    cells: list[CellResult]

    @property
    def failed(self) -> list[CellResult]:
        return [c for c in self.cells if not c.ok]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SUMMARY_SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for c in self.cells:
            w.writerow(c.as_list())
        return buf.getvalue()

    def table_csv(self) -> str:
        name = next((c.metric_name for c in self.cells if c.metric_name), "metric")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["number_of_clients", *(c.client_count for c in self.cells)])
        w.writerow(["split_ratio", *(c.ratio for c in self.cells)])
        w.writerow([name, *(f"{statistics.fmean(c.metrics):.2f}" if c.ok and c.metrics else "failed"
                            for c in self.cells)])
        return buf.getvalue()


def cell_configs(grid: Sequence[tuple[int, str]], base: ExperimentConfig) -> list[ExperimentConfig]:
    """Validated per-cell configs; any invalid cell is a ConfigError before anything runs."""
    if not grid:
        raise ConfigError("sweep grid is empty")
    out = []
    for i, (n, ratio) in enumerate(grid):
        out.append(validate_config(replace(base, clients=n, ratio=ratio, mode="split",
                                           seed=base.seed + i, out=None)))
    return out


def run_cell(index: int, cfg: ExperimentConfig, stride: int, out: Optional[str]) -> CellResult:
    res = CellResult(index, cfg.clients, cfg.ratio_text, cfg.seed, cfg.repeats)
    metrics = []
    try:
        for r in range(cfg.repeats):
            run_cfg = cfg.with_(seed=cfg.seed + r * stride)
            result = run_experiment(run_cfg)
            if out:
                d = Path(out) / f"cell{index:02d}"
                d.mkdir(parents=True, exist_ok=True)
                (d / f"metrics_r{r}.csv").write_text(metrics_csv(result.rows))
            final = result.final
            res.metric_name = result.setup.metric_name
            if final is None:
                continue
            metrics.append(final.val_metric)
            if r == 0:
                res.epochs = final.epoch
                res.final_train_loss = final.train_loss
    except (SplitMeshError, ValueError) as exc:
        log.warning("cell %d (%d clients, %s) failed: %s", index, cfg.clients, cfg.ratio_text, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    res.metrics = tuple(metrics)
    return res


def sweep(grid: Sequence[tuple[int, str]], base: ExperimentConfig, out: Optional[str] = None,
          workers: int = 1) -> SweepResult:
    """Run every cell; failures are recorded per cell and do not stop the sweep."""
    cfgs = cell_configs(grid, base)
    stride = len(cfgs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, i, c, stride, out) for i, c in enumerate(cfgs)]
            cells = [f.result() for f in futures]
    else:
        cells = [run_cell(i, c, stride, out) for i, c in enumerate(cfgs)]
    result = SweepResult(cells)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "summary.csv").write_text(result.summary_csv())
        (d / "table.csv").write_text(result.table_csv())
    return result


def parse_grid(text: str) -> list[tuple[int, str]]:
    """``"standard"`` (the nine-cell grid) or a comma list of ratios, e.g. ``"1:1:1,7:2:1"``; client count is the part count."""
    if text.strip() == "standard":
        return list(STANDARD_GRID)
    cells = []
    for item in text.split(","):
        item = item.strip()
        if item:
            cells.append((len(parse_ratio(item).parts), item))
    return cells
