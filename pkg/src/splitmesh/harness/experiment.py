from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data.datasets import CLASSIFICATION, REGRESSION, Dataset, load_csv, load_tensor_dir, synth
from ..data.partition import partition
from ..errors import ConfigError, TooFewSamples
from ..model import CHOLESTEROL_TARGET, ModelSpec, SplitPlan, TrainConfig, init_networks, plan_hash, split_model
from ..nn.losses import LossKind
from ..nodes.client import ClientNode
from ..nodes.schedule import plan_steps
from ..nodes.server import ServerNode
from ..nodes.simulate import EpochResult, train
from ..oracle import OracleRun, train_monolithic
from ..protocol.messages import Config
from ..protocol.transport import Transcript
from ..rng import MASK64, SYNTH, derive_seed
from .config import ExperimentConfig

log = logging.getLogger(__name__)

METRICS_SCHEMA = "# splitmesh-metrics v1"
METRICS_COLUMNS = ("experiment_id", "client_count", "ratio", "epoch", "train_loss",
                   "metric_name", "val_metric", "wall_seconds")
VAL_FRACTION_DIV = 5  # one row in five per shard is held out


@dataclass
class Setup:
    config: ExperimentConfig
    plan: SplitPlan
    train_config: TrainConfig
    dataset: Dataset
    shards: list[tuple[Dataset, Dataset]]  # (train, validation) per client

    @property
    def train_sizes(self) -> list[int]:
        return [len(tr) for tr, _ in self.shards]

    @property
    def metric_name(self) -> str:
        return "accuracy_pct" if self.plan.model.loss is LossKind.BCE else "rmsle"

    def make_config(self, client_id: int) -> Config:
        tc = self.train_config
        return Config(plan_hash(self.plan.model), tc.epochs, tc.batch_size, tc.learning_rate,
                      tc.seed & MASK64, tc.loss, self.plan.client_segment.to_json(),
                      self.train_sizes[client_id], tuple(self.train_sizes))


def train_val_split(idx: Sequence[int]) -> tuple[list[int], list[int]]:
    """Last fifth of a (already shuffled) shard is held out, at least one row."""
    idx = list(idx)
    if len(idx) < 2:
        raise TooFewSamples(f"a shard of {len(idx)} row(s) cannot be split into train and validation")
    n_val = max(1, len(idx) // VAL_FRACTION_DIV)
    return idx[:-n_val], idx[-n_val:]


def build_dataset(cfg: ExperimentConfig, spec: ModelSpec) -> Dataset:
    ds = dict(cfg.dataset)
    kind = ds.pop("kind")
    task = CLASSIFICATION if spec.loss is LossKind.BCE else REGRESSION
    if kind == "synthetic":
        n = int(ds.get("n", 192))
        noise = float(ds.get("noise", 1.0 if task == CLASSIFICATION else 0.1))
        kw = {}
        if "positive_fraction" in ds:
            kw["positive_fraction"] = float(ds["positive_fraction"])
        return synth(task, n, spec.input_shape, derive_seed(cfg.seed, SYNTH), noise=noise, **kw)
    if kind == "csv":
        return load_csv(ds["path"], ds.get("features"), ds.get("label", CHOLESTEROL_TARGET), task=task)
    if kind == "tensor_dir":
        return load_tensor_dir(ds["path"])
    raise ConfigError(f"unknown dataset kind {kind!r}")


def prepare(cfg: ExperimentConfig) -> Setup:
    spec, tc = cfg.model_and_training()
    plan = split_model(spec)
    data = build_dataset(cfg, spec)
    if data.sample_shape != spec.input_shape:
        raise ConfigError(f"dataset samples have shape {list(data.sample_shape)}, model expects "
                          f"{list(spec.input_shape)}")
    assignment = partition(len(data), cfg.split_ratio, cfg.seed)
    splits = [train_val_split(s) for s in assignment.shards]
    if cfg.dataset["kind"] == "csv":
        from ..data.datasets import normalize

        train_rows = [i for tr, _ in splits for i in tr]
        data, _ = normalize(data, train_rows)
    shards = [(data.subset(tr), data.subset(va)) for tr, va in splits]
    return Setup(cfg, plan, tc, data, shards)


def build_nodes(setup: Setup, learning_rate: float | None = None) -> tuple[ServerNode, list[ClientNode]]:
    tc = setup.train_config
    client_net, server_net = init_networks(setup.plan, tc.seed)
    lr = tc.learning_rate if learning_rate is None else learning_rate
    server = ServerNode(server_net, tc.loss, lr, range(len(setup.shards)))
    clients = [ClientNode(i, tr, va, client_net.copy(), tc.seed, setup.plan.model)
               for i, (tr, va) in enumerate(setup.shards)]
    return server, clients


def run_split_local(setup: Setup, transcript: Transcript | None = None
                    ) -> tuple[list[EpochResult], ServerNode, list[ClientNode]]:
    server, clients = build_nodes(setup)
    tc = setup.train_config
    steps = plan_steps(tc.batch_size, setup.train_sizes, tc.epochs)
    results = train(server, clients, steps, setup.make_config, transcript)
    return results, server, clients


def run_oracle(setup: Setup, learning_rate: float | None = None) -> OracleRun:
    tc = setup.train_config
    lr = tc.learning_rate if learning_rate is None else learning_rate
    return train_monolithic(setup.plan, setup.shards, tc.epochs, tc.batch_size, lr, tc.seed)


@dataclass
class MetricsRow:
    experiment_id: str
    client_count: int
    ratio: str
    epoch: int
    train_loss: float
    metric_name: str
    val_metric: float
    wall_seconds: float

    def as_list(self) -> list[str]:
        return [self.experiment_id, str(self.client_count), self.ratio, str(self.epoch),
                f"{self.train_loss:.9g}", self.metric_name, f"{self.val_metric:.9g}",
                f"{self.wall_seconds:.3f}"]


@dataclass
class ExperimentResult:
    rows: list[MetricsRow]
    setup: Setup

    @property
    def final(self) -> MetricsRow | None:
        return self.rows[-1] if self.rows else None


def experiment_id(cfg: ExperimentConfig) -> str:
    name = cfg.preset or "custom"
    return f"{name}-{cfg.scale}-{cfg.mode}-n{cfg.client_count}-{cfg.ratio_text}-s{cfg.seed}"


def metrics_rows(cfg: ExperimentConfig, setup: Setup, results: Sequence[EpochResult]) -> list[MetricsRow]:
    eid = experiment_id(cfg)
    return [MetricsRow(eid, cfg.client_count, cfg.ratio_text, r.epoch, r.train_loss, setup.metric_name,
                       r.metric, r.seconds) for r in results]


def metrics_csv(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    buf.write(METRICS_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, transcript: Transcript | None = None) -> ExperimentResult:
    """Build data, partition, train (split simulation or monolithic), write metrics.csv if ``out``."""
    setup = prepare(cfg)
    if cfg.mode == "oracle":
        results = run_oracle(setup).results
    else:
        results, _, _ = run_split_local(setup, transcript)
    rows = metrics_rows(cfg, setup, results)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(metrics_csv(rows))
    return ExperimentResult(rows, setup)


@dataclass
class OracleComparison:
    max_loss_diff: float
    max_metric_diff: float
    max_param_diff: float
    epochs: int
    tolerance: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.max_loss_diff <= self.tolerance and self.max_param_diff <= self.tolerance
                and self.max_metric_diff <= self.tolerance)


def _max_abs_diff(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for x, y in zip(a, b, strict=True):
        if x.shape != y.shape:
            return float("inf")
        d = np.abs(x.astype(np.float64) - y.astype(np.float64))
        if d.size:
            worst = max(worst, float(np.nan_to_num(d, nan=np.inf).max()))
    return worst


def compare_oracle(cfg: ExperimentConfig, oracle_learning_rate: float | None = None) -> OracleComparison:
    """Run split simulation and the matching monolithic run; exact agreement passes."""
    if cfg.mode != "split":
        cfg = cfg.with_(mode="split")
    setup = prepare(cfg)
    split_results, server, clients = run_split_local(setup)
    oracle = run_oracle(setup, oracle_learning_rate)
    loss_diff = max((abs(a.train_loss - b.train_loss) for a, b in zip(split_results, oracle.results)),
                    default=0.0)
    metric_diff = max((abs(a.metric - b.metric) for a, b in zip(split_results, oracle.results)), default=0.0)
    if len(split_results) != len(oracle.results):
        loss_diff = float("inf")
    params_split = [p for c in clients for p in c.net.params()] + server.net.params()
    params_oracle = [p for n in oracle.first_layers for p in n.params()] + oracle.rest.params()
    param_diff = _max_abs_diff(params_split, params_oracle)
    return OracleComparison(loss_diff, metric_diff, param_diff, len(split_results))
