"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 runtime error, 4 oracle mismatch
(and 3 when any sweep cell failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .errors import ConfigError, ConnectionClosed, ParseError, SplitMeshError, UnknownPreset
from .harness.config import ExperimentConfig, load_config
from .harness.experiment import (build_nodes, compare_oracle, metrics_csv, metrics_rows, prepare,
                                 run_experiment)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_MISMATCH = 0, 2, 3, 4

log = logging.getLogger("splitmesh")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "out", None):
        changes["out"] = args.out
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        changes["epochs"] = args.epochs
    return cfg.with_(**changes) if changes else cfg


def _print_rows(rows) -> None:
    sys.stdout.write(metrics_csv(rows))


def cmd_run_local(args) -> int:
    cfg = _config(args).with_(mode="split")
    _print_rows(run_experiment(cfg).rows)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args).with_(mode="oracle")
    _print_rows(run_experiment(cfg).rows)
    return EXIT_OK


def cmd_server(args) -> int:
    from .nodes.schedule import plan_steps
    from .nodes.tcp import serve
    from .protocol.transport import parse_addr

    cfg = _config(args).with_(mode="split")
    setup = prepare(cfg)
    server, _ = build_nodes(setup)
    tc = setup.train_config
    steps = plan_steps(tc.batch_size, setup.train_sizes, tc.epochs)
    log.info("waiting for %d clients on %s", len(setup.shards), args.listen)
    results = serve(server, steps, setup.make_config, parse_addr(args.listen, "0.0.0.0"), timeout=cfg.timeout)
    rows = metrics_rows(cfg, setup, results)
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / "metrics.csv").write_text(metrics_csv(rows))
    _print_rows(rows)
    return EXIT_OK


def cmd_client(args) -> int:
    from .nodes.tcp import run_client
    from .protocol.transport import TcpTransport, parse_addr

    cfg = _config(args).with_(mode="split")
    setup = prepare(cfg)
    if not 0 <= args.shard < len(setup.shards):
        raise ConfigError(f"shard {args.shard} out of range for {len(setup.shards)} clients")
    _, clients = build_nodes(setup)
    client = clients[args.shard]
    host, port = parse_addr(args.connect)
    deadline = time.monotonic() + cfg.timeout
    while True:
        try:
            transport = TcpTransport.connect(host, port)
            break
        except OSError as exc:
            if time.monotonic() > deadline:
                raise ConnectionClosed(f"cannot reach server at {host}:{port}: {exc}") from exc
            time.sleep(0.2)
    try:
        metrics = run_client(client, transport, timeout=cfg.timeout)
    finally:
        transport.close()
    for m in metrics:
        print(f"epoch {m.epoch} train_loss {m.loss:.9g} {setup.metric_name} {m.metric:.9g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    report = compare_oracle(cfg, oracle_learning_rate=args.oracle_lr)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} epochs={report.epochs} max_loss_diff={report.max_loss_diff:.3e} "
          f"max_metric_diff={report.max_metric_diff:.3e} max_param_diff={report.max_param_diff:.3e}")
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_sweep(args) -> int:
    from .harness.sweep import parse_grid, sweep

    cfg = _config(args)
    if args.repeats is not None:
        cfg = cfg.with_(repeats=args.repeats)
    try:
        grid = parse_grid(args.grid)
    except ParseError as exc:
        raise ConfigError(f"bad grid: {exc}") from exc
    result = sweep(grid, cfg, out=cfg.out, workers=args.workers)
    sys.stdout.write(result.summary_csv())
    sys.stdout.write("\n" + result.table_csv())
    return EXIT_RUNTIME if result.failed else EXIT_OK


def cmd_privacy(args) -> int:
    from .harness.privacy import privacy_report

    cfg = _config(args)
    report = privacy_report(cfg, samples=args.samples, out=args.out or cfg.out, train=not args.untrained,
                            max_shift=args.max_shift)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_preset(args) -> int:
    from .model import preset

    spec, tc = preset(args.name, args.scale)
    print(json.dumps({"model": spec.to_dict(), "training": {
        "epochs": tc.epochs, "batch_size": tc.batch_size, "learning_rate": tc.learning_rate,
        "loss": tc.loss.value}}, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    from .model import split_model

    cfg = _config(args)
    spec, tc = cfg.model_and_training()
    plan = split_model(spec)
    print(f"ok: {spec.name or 'model'} {len(plan.client_segment.layers)} client layer(s), "
          f"{len(plan.server_segment.layers)} server layer(s), {cfg.client_count} client(s) "
          f"ratio {cfg.ratio_text}, epochs {tc.epochs}, batch {tc.batch_size}")
    return EXIT_OK


def cmd_convert_pgm(args) -> int:
    from .data.tensorfile import pgm_to_nt

    size = None
    if args.size:
        try:
            h, w = (int(v) for v in args.size.lower().split("x"))
        except ValueError:
            raise ConfigError(f"--size must look like 64x64, got {args.size!r}") from None
        size = (h, w)
    t = pgm_to_nt(args.src, args.dst, size)
    print(f"wrote {args.dst} shape {list(t.shape)}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .harness.checks import gradcheck_suite

    ok = True
    for name, rep in gradcheck_suite(args.seed or 0):
        ok &= rep.passed
        print(f"{'PASS' if rep.passed else 'FAIL'} {name}: max_rel_err={rep.max_rel_err:.3e} "
              f"checked={rep.checked} worst={rep.worst}")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitmesh", description="Multi-client split learning runner.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help_, func):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="base seed (overrides config)")
        sp.add_argument("--epochs", type=int, help="epochs (overrides config)")
        sp.set_defaults(func=func)
        return sp

    with_config("run-local", "train all nodes in one process", cmd_run_local)
    with_config("oracle", "monolithic baseline", cmd_oracle)
    sp = with_config("server", "run the server node over TCP", cmd_server)
    sp.add_argument("--listen", default="0.0.0.0:7310", help="host:port to listen on")
    sp = with_config("client", "run one client node over TCP", cmd_client)
    sp.add_argument("--shard", type=int, required=True, help="client id / shard index")
    sp.add_argument("--connect", default="127.0.0.1:7310", help="server host:port")
    sp = with_config("compare", "split vs monolithic equivalence check", cmd_compare)
    sp.add_argument("--oracle-lr", type=float, default=None,
                    help="learning rate for the oracle run (negative control)")
    sp = with_config("sweep", "client-count by ratio grid", cmd_sweep)
    sp.add_argument("--grid", default="standard", help='"standard" or comma-separated ratios')
    sp.add_argument("--repeats", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1, help="cells run in parallel processes")
    sp = with_config("privacy", "input vs feature-map correlation report", cmd_privacy)
    sp.add_argument("--samples", type=int, default=8)
    sp.add_argument("--max-shift", type=int, default=2)
    sp.add_argument("--untrained", action="store_true", help="use the initial client layer")
    with_config("validate", "check a config without training", cmd_validate)

    sp = sub.add_parser("preset", help="print a preset model as JSON")
    sp.add_argument("name")
    sp.add_argument("--scale", default="desk")
    sp.set_defaults(func=cmd_preset)
    sp = sub.add_parser("convert-pgm", help="8-bit PGM (P5) to .nt")
    sp.add_argument("src")
    sp.add_argument("dst")
    sp.add_argument("--size", help="HxW resize target (bilinear)")
    sp.set_defaults(func=cmd_convert_pgm)
    sp = sub.add_parser("gradcheck", help="finite-difference check of every layer kind")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    level = os.environ.get("SPLITMESH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownPreset) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SplitMeshError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
