"""Command-line entry point: ``fedkf run | ledger | bench``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import ledger
from .bench import format_bench, run_bench
from .config import ConfigError, ExperimentConfig, load_config, load_preset
from .metrics import report
from .outputs import comparison_table, render_metrics, render_round_rmse, render_trace
from .simnet import run_experiment

log = logging.getLogger("fedkf")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else load_preset("paper")
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return config.replace(**changes) if changes else config


def render_run(config: ExperimentConfig) -> tuple[dict[str, str], list]:
    """Run every requested mode; return ``{filename: contents}`` and the reports."""
    files: dict[str, str] = {}
    reports = []
    for mode in config.modes:
        traces = run_experiment(config, mode)
        rep = report(traces, config.burn_in, mode)
        reports.append(rep)
        for edge in config.edges:
            name = f"trace_{mode}.csv" if len(config.edges) == 1 else f"trace_{mode}_{edge.id}.csv"
            files[name] = render_trace(config, traces, edge.id)
        files[f"rmse_per_round_{mode}.csv"] = render_round_rmse(config, rep)
    files["metrics.csv"] = render_metrics(config, reports)
    return files, reports


def write_all(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file or none: partial writes are removed on failure."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out_dir / name
            with open(path, "w", encoding="utf-8", newline="") as fh:
                written.append(path)
                fh.write(text)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def cmd_run(args) -> int:
    config = _load(args)
    files, reports = render_run(config)
    try:
        write_all(Path(args.out), files)
    except OSError as exc:
        print(f"error: cannot write outputs to {args.out}: {exc}", file=sys.stderr)
        return 1
    print(comparison_table(reports))
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def cmd_ledger(args) -> int:
    path = Path(args.chain)
    if args.action == "init":
        chain = ledger.genesis(args.timestamp or 0)
        if args.ids:
            chain = ledger.append_block(chain, args.ids)
        chain.save(path)
        print(f"initialised {path} ({len(chain)} blocks)")
        return 0

    chain = ledger.Chain.load(path)
    if args.action == "add":
        if not args.ids:
            print("error: add needs at least one device ID", file=sys.stderr)
            return 2
        chain = ledger.append_block(chain, args.ids, args.timestamp)
        chain.save(path)
        print(f"block {len(chain) - 1} added: {', '.join(args.ids)}")
        return 0
    if args.action == "verify":
        result = ledger.verify_chain(chain)
        print(result)
        return 0 if result.ok else 1
    if args.action == "show":
        result = ledger.verify_chain(chain)
        if not result.ok:
            print(result, file=sys.stderr)
            return 1
        for device_id in chain.device_ids():
            print(device_id)
        return 0
    raise AssertionError(args.action)


def cmd_bench(args) -> int:
    config = _load(args)
    results = run_bench(config, args.rounds)
    print(format_bench(results, args.rounds))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedkf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV outputs")
    run.add_argument("--config", help="experiment JSON (default: built-in paper preset)")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--mode", choices=("fkf", "skf", "both"))
    run.add_argument("--seed", type=int)
    run.set_defaults(func=cmd_run)

    led = sub.add_parser("ledger", help="manage a trusted-device chain file")
    led.add_argument("action", choices=("init", "add", "verify", "show"))
    led.add_argument("ids", nargs="*", help="device IDs for init/add")
    led.add_argument("--chain", required=True, help="chain file path")
    led.add_argument("--timestamp", type=int, help="block timestamp (default: previous + 1)")
    led.set_defaults(func=cmd_ledger)

    bench = sub.add_parser("bench", help="time local and global phases per round")
    bench.add_argument("--config", help="experiment JSON (default: built-in paper preset)")
    bench.add_argument("--rounds", type=int, default=10_000)
    bench.add_argument("--seed", type=int)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ledger.LedgerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface as a nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
